"""Independent reference computations used by the tests.

These deliberately avoid the package's estimation code: fixed effects are
entered as explicit dummy columns and everything is solved densely.
"""

import numpy as np
import pandas as pd


def dummies(labels, drop_first=True):
    d = pd.get_dummies(pd.Series(np.asarray(labels)).astype(str), drop_first=drop_first, dtype=float)
    return d.to_numpy()


def dense_ols(y, X, fe_labels=(), add_const=True):
    """OLS with dummy-variable fixed effects; returns (beta for X, residuals, full design)."""
    blocks = [np.asarray(X, dtype=float).reshape(len(y), -1)]
    if add_const:
        blocks.append(np.ones((len(y), 1)))
    for labels in fe_labels:
        blocks.append(dummies(labels))
    Z = np.column_stack(blocks)
    coef, *_ = np.linalg.lstsq(Z, y, rcond=None)
    k = blocks[0].shape[1]
    return coef[:k], y - Z @ coef, Z


def dense_residualize(X, fe_labels):
    Z = np.column_stack([np.ones(X.shape[0])] + [dummies(l) for l in fe_labels])
    coef, *_ = np.linalg.lstsq(Z, X, rcond=None)
    return X - Z @ coef


def sandwich(Z, u, clusters, k_first):
    """Unscaled cluster sandwich for the first ``k_first`` coefficients of a dense fit."""
    bread = np.linalg.pinv(Z.T @ Z)
    codes = pd.factorize(np.asarray(clusters))[0]
    S = np.zeros((codes.max() + 1, Z.shape[1]))
    np.add.at(S, codes, Z * u[:, None])
    V = bread @ (S.T @ S) @ bread
    return V[:k_first, :k_first]


def jackknife(estimator, n):
    reps = np.array([estimator(i) for i in range(n)])
    return (n - 1) / n * np.sum((reps - reps.mean()) ** 2)
