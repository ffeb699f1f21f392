"""Fast invariant checks behind ``agmax selftest``.

Each check compares the library against a small independent computation.
The full property suites live in the test tree; this is the quick version
that runs from an installed package.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from . import diffcore as dc
from .agreement import agreement_loss, ce_with_targets, frozen_ce_reference, joint_matrix, mi_loss, mutual_information
from .augment import apply_cutmix, cut_box, cutout_at, mixup, square_box
from .augment.mixing import MixParams
from .data import Dataset, encode_cifar, parse_cifar_bytes
from .rng import make_rng

GRAD_TOL = 1e-4


def _random_joint(rng, c):
    a = rng.random((c, c)) ** 3
    a = a + a.T
    return a / a.sum()


def check_mi_oracle() -> str:
    rng = make_rng(0, "selftest", "mi")
    worst = 0.0
    for _ in range(200):
        c = int(rng.integers(2, 11))
        p = _random_joint(rng, c)
        r, q = p.sum(1), p.sum(0)
        oracle = sum(p[i, j] * math.log(p[i, j] / (r[i] * q[j])) for i in range(c) for j in range(c) if p[i, j] > 0)
        got = float(mutual_information(p).value)
        assert -1e-12 <= got <= math.log(c) + 1e-6, got
        worst = max(worst, abs(got - oracle))
    assert worst < 1e-10, worst
    return f"max |I - oracle| = {worst:.1e}"


def check_joint_oracle() -> str:
    rng = make_rng(0, "selftest", "joint")
    for _ in range(50):
        n, c = int(rng.integers(1, 65)), int(rng.integers(2, 11))
        p1 = rng.dirichlet(np.ones(c), n)
        p2 = rng.dirichlet(np.ones(c), n)
        oracle = sum(np.outer(p1[i], p2[i]) for i in range(n)) / n
        got = joint_matrix(p1, p2).value
        assert np.max(np.abs(got - 0.5 * (oracle + oracle.T))) < 1e-12
        assert np.array_equal(got, got.T) and abs(got.sum() - 1) < 1e-9
    return "50 batches"


def check_gradients() -> str:
    rng = make_rng(0, "selftest", "grad")
    x = rng.normal(size=(4, 3))
    other = rng.normal(size=(4, 3))
    cases: dict[str, Callable] = {
        "softmax": lambda v: dc.sum(dc.softmax(v) * other),
        "log": lambda v: dc.sum(dc.log(dc.exp(v) + 1.0)),
        "matmul": lambda v: dc.sum(dc.matmul(v, dc.transpose(dc.tensor(other)))),
        "relu": lambda v: dc.sum(dc.relu(v) * other),
    }
    cases.update({f"agree-{k}": (lambda v, k=k: agreement_loss(v, dc.tensor(other), k)) for k in ("mi", "mse", "kl")})
    worst = max(dc.grad_check(f, x) for f in cases.values())
    t1, t2 = frozen_ce_reference(x, other)
    frozen = lambda v: ce_with_targets(v, dc.tensor(other), t1, t2)  # noqa: E731
    worst = max(worst, dc.grad_check(lambda v: agreement_loss(v, dc.tensor(other), "ce"), x, reference=frozen))
    cases["agree-ce"] = frozen
    assert worst < GRAD_TOL, worst
    return f"{len(cases)} functions, max rel err {worst:.1e}"


def check_pixel_accounting() -> str:
    rng = make_rng(0, "selftest", "pixels")
    imgs = rng.random((2, 8, 8, 1))
    out, mixed = mixup(imgs, np.array([0, 1]), 1.0, rng)
    lam = float(mixed.lam[0])
    perm = mixed.label_b  # labels are 0, 1 so label_b is the permutation
    assert np.array_equal(out, lam * imgs + (1 - lam) * imgs[perm])
    for size in range(0, 9):
        for cy in range(8):
            for cx in range(8):
                y0, y1, x0, x1 = square_box(8, 8, size, cy, cx)
                changed = np.any(cutout_at(imgs[0], size, cy, cx, 2.0) != imgs[0], axis=-1).sum()
                assert changed == max(y1 - y0, 0) * max(x1 - x0, 0)
    distinct = np.stack([np.zeros((8, 8, 1)), np.ones((8, 8, 1))])
    for lam in np.linspace(0, 1, 11):
        box = cut_box(8, 8, float(lam), 3, 5)
        out, mixed = apply_cutmix(distinct, np.array([0, 1]), MixParams(np.array([1, 0]), float(lam), box))
        assert mixed.lam[0] == 1.0 - np.count_nonzero(out[0] != distinct[0]) / 64.0
    return "mixup, cutout and cutmix on 8x8"


def check_limits() -> str:
    for c in (2, 4, 10):
        z = np.eye(c)[np.arange(4 * c) % c] * 60.0
        assert abs(float(mi_loss(dc.tensor(z), dc.tensor(z)).value) + math.log(c)) < 1e-6
        a = np.random.default_rng(c).dirichlet(np.ones(c))
        indep = np.outer(a, a)
        assert abs(float(mutual_information(indep).value)) < 1e-9
    return "MI loss = -ln C on one-hot agreement, I = 0 on independent joints"


def check_cifar_roundtrip() -> str:
    rng = make_rng(0, "selftest", "cifar")
    raw = rng.integers(0, 256, (3, 32, 32, 3)).astype(np.float64) / 255.0
    ds = Dataset(raw, np.array([7, 0, 9]), 10)
    back = parse_cifar_bytes(encode_cifar(ds))
    assert np.array_equal(back.images, ds.images) and np.array_equal(back.labels, ds.labels)
    return "3 records"


CHECKS = {
    "mi-oracle": check_mi_oracle,
    "joint-oracle": check_joint_oracle,
    "gradients": check_gradients,
    "pixel-accounting": check_pixel_accounting,
    "limit-values": check_limits,
    "cifar-roundtrip": check_cifar_roundtrip,
}


def run_selftest(out=print) -> bool:
    ok = True
    for name, check in CHECKS.items():
        try:
            detail = check()
            out(f"PASS {name}: {detail}")
        except AssertionError as exc:
            ok = False
            out(f"FAIL {name}: {exc}")
    return ok
