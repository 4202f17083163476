import numpy as np

from infoteacher.partition import JointSample
from infoteacher.regressors import init_mlp, mlp_forward, mlp_loss_and_grad

# one (number, name, passed, detail) record per acceptance criterion, reported at session end
ACCEPTANCE = []


def gaussian_pair(rho, m, seed):
    """Standard bivariate normal with correlation ``rho``; MI is ``-log(1 - rho**2) / 2``."""
    rng = np.random.default_rng(seed)
    x = rng.normal(size=m)
    r = rho * x + np.sqrt(1.0 - rho**2) * rng.normal(size=m)
    return JointSample(x, r)


def gaussian_mi(rho):
    return -0.5 * np.log1p(-rho**2)


def uniform_normal_pair(m, seed):
    """X ~ U[0, 1] with an independent N(0, 1) residual."""
    rng = np.random.default_rng(seed)
    return JointSample(rng.uniform(size=m), rng.normal(size=m))


def write_ccpp_like(path, n, seed=0):
    """Write a file with the CCPP column layout (AT, V, AP, RH -> PE) and a linear-plus-noise target."""
    rng = np.random.default_rng(seed)
    at, v = rng.uniform(2, 37, n), rng.uniform(25, 81, n)
    ap, rh = rng.uniform(993, 1033, n), rng.uniform(25, 100, n)
    pe = 454.0 - 1.97 * at - 0.23 * v + 0.06 * ap - 0.16 * rh + rng.normal(0, 4.5, n)
    rows = ["AT,V,AP,RH,PE"] + [",".join(repr(float(t)) for t in row) for row in zip(at, v, ap, rh, pe)]
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return path


def numeric_grad(layers, xs, ys, h=1e-5):
    """Central differences of the loss with respect to every parameter."""
    out = []
    for W, b in layers:
        pair = []
        for arr in (W, b):
            g = np.zeros_like(arr)
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                i = it.multi_index
                old = arr[i]
                arr[i] = old + h
                up = np.mean((mlp_forward(layers, xs) - ys) ** 2)
                arr[i] = old - h
                down = np.mean((mlp_forward(layers, xs) - ys) ** 2)
                arr[i] = old
                g[i] = (up - down) / (2 * h)
            pair.append(g)
        out.append(tuple(pair))
    return out


def flat(grads):
    return np.concatenate([g.ravel() for pair in grads for g in pair])


def gradient_rel_error(sizes, batch, seed):
    rng = np.random.default_rng(seed)
    layers = init_mlp(sizes, rng)
    # random biases so the check also covers them away from zero
    layers = [(W, rng.normal(scale=0.1, size=b.shape)) for W, b in layers]
    xs = rng.normal(size=(batch, sizes[0]))
    ys = rng.normal(size=(batch, sizes[-1]))
    _, grads = mlp_loss_and_grad(layers, xs, ys)
    a, n = flat(grads), flat(numeric_grad(layers, xs, ys))
    return np.linalg.norm(a - n) / max(np.linalg.norm(a), np.linalg.norm(n))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {number} {'PASS' if ok else 'FAIL'}: {name}: {detail}")
