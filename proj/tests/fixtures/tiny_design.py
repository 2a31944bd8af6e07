"""Reference values for the 5 x 3 augmented-design fixture (k = 1).

Computed with numpy's LAPACK eigensolver, independently of the C++ code.
Run: python3 tiny_design.py
"""
import numpy as np

X = np.array([[2.0, 1.0, 0.0],
              [1.0, 3.0, -1.0],
              [0.0, -1.0, 2.0],
              [-2.0, 0.5, 1.0],
              [1.5, -2.0, -1.0]])
n, p = X.shape
k = 1

S = X.T @ X / n
evals, evecs = np.linalg.eigh(S / p)
order = np.argsort(evals)[::-1]
evals, evecs = evals[order], evecs[:, order]
for r in range(p):
    j = np.argmax(np.abs(evecs[:, r]))
    if evecs[j, r] < 0:
        evecs[:, r] = -evecs[:, r]

psi = evecs[:, :k]
xi = X @ psi / np.sqrt(p * evals[:k])
P = np.eye(p) - psi @ psi.T
proj = X @ P
s = np.sqrt((proj ** 2).mean(axis=0))
phi = np.hstack([xi, proj / s])

np.set_printoptions(precision=17)
print("eigenvalues", repr(evals))
print("psi1", repr(psi[:, 0]))
print("col_norms", repr(s))
for row in phi:
    print("{" + ", ".join(f"{v:.17g}" for v in row) + "},")
