# Pointer measurements always give POVMs; the flux does not.
import numpy as np

from bohmarrival import BackflowPair, PlaneWave, Superposition, backflow_wavevectors
from bohmarrival.povm import check_povm, construct_pointer_povm, current_povm_counterexample, random_pointer_model

model = random_pointer_model(dS=3, dM=5, seed=1)
family = construct_pointer_povm(model)
print("cells:", model.partition)
print(check_povm(family).to_json())

psi = np.array([1, 1j, -1]) / np.sqrt(3)
print("from the POVM:       ", family.probabilities(psi))
print("from joint evolution:", model.direct_probabilities(psi))

k1, k2 = backflow_wavevectors()
alpha = BackflowPair(k1, k2).alpha
rep = current_povm_counterexample(PlaneWave(k1), Superposition([(alpha, PlaneWave(k2))]), np.zeros(3), 0.0)
print(rep.to_json())
