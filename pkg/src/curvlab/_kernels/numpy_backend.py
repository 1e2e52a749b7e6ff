"""Pure-numpy implementations of the hot contraction kernels.

All functions take node-flattened arrays: the leading axis runs over the
N**n grid nodes in lexicographic order, component axes follow. The compiled
extension implements the same signatures; either backend may be active.
"""

import numpy as np

NAME = "python"


def christoffel(ginv, S):
    """gamma[m,k,i,j] = 0.5 * ginv[m,k,l] * S[m,i,j,l] (sum over l)."""
    return 0.5 * np.einsum("mkl,mijl->mkij", ginv, S)


def ricci_quadratic(gam):
    """q[m,i,j] = gam[m,k,k,l] gam[m,l,i,j] - gam[m,k,i,l] gam[m,l,k,j]."""
    tr = np.einsum("mkkl->ml", gam)
    return np.einsum("ml,mlij->mij", tr, gam) - np.einsum(
        "mkil,mlkj->mij", gam, gam
    )


def riemann_sq(gam, dgam):
    """Squared Frobenius norm of the coordinate curvature tensor.

    R^l_{ijk} = dgam[m,i,l,j,k] - dgam[m,j,l,i,k]
                + gam[m,l,i,p] gam[m,p,j,k] - gam[m,l,j,p] gam[m,p,i,k]
    summed over all four indices after squaring.
    """
    riem = (
        dgam.transpose(0, 2, 1, 3, 4)
        - dgam.transpose(0, 2, 3, 1, 4)
        + np.einsum("mlip,mpjk->mlijk", gam, gam)
        - np.einsum("mljp,mpik->mlijk", gam, gam)
    )
    return np.einsum("mlijk,mlijk->m", riem, riem)


def vf_terms(ginv, dginv, gam):
    """Vector and scalar parts of the weak-curvature decomposition.

    v[m,k] = ginv[m,i,j] gam[m,k,i,j] - ginv[m,i,k] gam[m,j,j,i]
    f[m]   = -dginv[m,k,i,j] gam[m,k,i,j] + dginv[m,k,i,k] gam[m,j,j,i]
             + ginv[m,i,j] (gam[m,k,k,l] gam[m,l,i,j] - gam[m,k,j,l] gam[m,l,i,k])

    dginv[m,k,i,j] holds the k-th background-covariant derivative of ginv.
    The background curvature trace term is added by the caller.
    """
    trg = np.einsum("mjji->mi", gam)
    v = np.einsum("mij,mkij->mk", ginv, gam) - np.einsum("mik,mi->mk", ginv, trg)
    f = -np.einsum("mkij,mkij->m", dginv, gam)
    f += np.einsum("mkik,mi->m", dginv, trg)
    f += np.einsum("mij,ml,mlij->m", ginv, trg, gam)
    f -= np.einsum("mij,mkjl,mlik->m", ginv, gam, gam)
    return v, f


def sym_grad_v(gam, v, dv):
    """(nabla_i v_j + nabla_j v_i) for a covector v: dv[m,i,j] = D_i v_j."""
    corr = np.einsum("mkij,mk->mij", gam, v)
    return dv + dv.transpose(0, 2, 1) - 2.0 * corr


def metric_dot_sym(ginv, a, b):
    """Pointwise inner product ginv[m,i,p] ginv[m,j,q] a[m,i,j] b[m,p,q]."""
    return np.einsum("mip,mjq,mij,mpq->m", ginv, ginv, a, b)
