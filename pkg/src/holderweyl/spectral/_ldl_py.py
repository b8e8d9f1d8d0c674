"""Pure-Python twin of the compiled LDL^T inertia kernel (``_ldl_cy``).

Same algorithm and return values; the inner column update is a numpy
slice operation instead of a scalar loop.  Used when the extension is not
built, and as a cross-check in the test-suite.
"""
import numpy as np


def symbolic(Ap, Ai):
    n = len(Ap) - 1
    parent = [-1] * n
    flag = [0] * n
    lnz = [0] * n
    Ap = Ap.tolist()
    Ai = Ai.tolist()
    for k in range(n):
        flag[k] = k
        for p in range(Ap[k], Ap[k + 1]):
            i = Ai[p]
            if i < k:
                while flag[i] != k:
                    if parent[i] == -1:
                        parent[i] = k
                    lnz[i] += 1
                    flag[i] = k
                    i = parent[i]
    Lp = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(lnz, out=Lp[1:])
    return Lp, np.asarray(parent, dtype=np.int64)


def numeric_inertia(Ap, Ai, Ax, Lp, parent, shift, tol):
    n = len(Ap) - 1
    nnz = int(Lp[n])
    Li = np.empty(max(nnz, 1), dtype=np.int64)
    Lx = np.empty(max(nnz, 1), dtype=np.float64)
    D = np.empty(max(n, 1))
    Y = np.zeros(max(n, 1))
    lnz = np.zeros(max(n, 1), dtype=np.int64)
    flag = [0] * n
    par = parent.tolist()
    Lp_list = Lp.tolist()
    Ap_list = Ap.tolist()
    Ai_list = Ai.tolist()
    n_neg = 0
    tiny = -1
    min_piv = np.inf
    for k in range(n):
        flag[k] = k
        paths = []
        for p in range(Ap_list[k], Ap_list[k + 1]):
            i = Ai_list[p]
            if i <= k:
                Y[i] += Ax[p]
                path = []
                while flag[i] != k:
                    path.append(i)
                    flag[i] = k
                    i = par[i]
                paths.append(path)
        d = Y[k] - shift
        Y[k] = 0.0
        # later paths sit on top of the compiled kernel's stack
        for i in (j for path in reversed(paths) for j in path):
            yi = Y[i]
            Y[i] = 0.0
            start = Lp_list[i]
            p2 = start + lnz[i]
            if p2 > start:
                Y[Li[start:p2]] -= Lx[start:p2] * yi
            l_ki = yi / D[i]
            d -= l_ki * yi
            Li[p2] = k
            Lx[p2] = l_ki
            lnz[i] += 1
        D[k] = d
        min_piv = min(min_piv, abs(d))
        if abs(d) <= tol:
            tiny = k
            break
        if d < 0:
            n_neg += 1
    return n_neg, tiny, float(min_piv)
