import numpy as np
import pytest

from attnlab.dynconv import (
    DynamicConvParams,
    dynamic_conv1d,
    dynamic_conv2d,
    dynamic_kernel,
    glu,
    group_of_channel,
)
from attnlab.errors import ContractViolation, ShapeMismatch
from attnlab.tensor import Rng, Tensor, counting, finite_diff_check

from oracles import glu_numpy, loop_dynamic1d, loop_dynamic2d


def oracle_kernel_pred(params):
    """Library predictor columns rearranged to (groups, points, c)."""
    n_pts = len(params.points)
    kp = np.zeros((params.n_groups, n_pts, params.c_in))
    for g in range(params.n_groups):
        for j in range(n_pts):
            kp[g, j] = params.kernel_pred.data[:, g * n_pts + j]
    return kp


def test_group_of_channel_frozen_cases():
    assert group_of_channel(1, 32, 16) == 1
    assert group_of_channel(3, 32, 16) == 2
    assert group_of_channel(32, 32, 16) == 16
    assert group_of_channel(8, 8, 2) == 2
    assert group_of_channel(4, 8, 2) == 1
    with pytest.raises(ShapeMismatch):
        group_of_channel(1, 10, 4)
    with pytest.raises(ContractViolation):
        group_of_channel(0, 8, 2)
    with pytest.raises(ContractViolation):
        group_of_channel(9, 8, 2)


def test_glu_matches_numpy():
    rng = Rng(71)
    params = DynamicConvParams(6, 6, 3, n_groups=2, rng=rng.child(0))
    x = rng.uniform(-1, 1, (5, 6))
    got = glu(Tensor(x), params)
    want = glu_numpy(
        x,
        params.glu_lin_w.data,
        params.glu_lin_b.data,
        params.glu_gate_w.data,
        params.glu_gate_b.data,
    )
    assert np.abs(got.data - want).max() <= 1e-12


def test_kernel_rows_are_distributions():
    rng = Rng(73)
    params = DynamicConvParams(8, 8, 3, n_groups=4, rng=rng.child(0))
    h = Tensor(rng.uniform(-3, 3, (10, 8)))
    k = dynamic_kernel(h, params)
    assert k.shape == (10, 4, 3)
    assert np.all(k.data >= 0)
    assert np.abs(k.data.sum(axis=-1) - 1.0).max() <= 1e-6


def test_forward_matches_loop_oracle_1d():
    rng = Rng(79)
    params = DynamicConvParams(6, 4, 3, n_groups=3, rng=rng.child(0))
    x = rng.uniform(-1, 1, (9, 6))
    got = dynamic_conv1d(Tensor(x), params)
    h = glu_numpy(
        x,
        params.glu_lin_w.data,
        params.glu_lin_b.data,
        params.glu_gate_w.data,
        params.glu_gate_b.data,
    )
    want = loop_dynamic1d(
        h, oracle_kernel_pred(params), params.point_w.data, 3,
        [p[0] for p in params.points],
    )
    assert np.abs(got.data - want).max() <= 1e-9


def test_forward_matches_loop_oracle_2d():
    rng = Rng(83)
    params = DynamicConvParams(4, 3, 3, n_groups=2, rng=rng.child(0), ndim=2)
    x = rng.uniform(-1, 1, (12, 4))
    got = dynamic_conv2d(Tensor(x), params, (3, 4))
    h = glu_numpy(
        x,
        params.glu_lin_w.data,
        params.glu_lin_b.data,
        params.glu_gate_w.data,
        params.glu_gate_b.data,
    )
    want = loop_dynamic2d(
        h, oracle_kernel_pred(params), params.point_w.data, 2, params.points, (3, 4)
    )
    assert np.abs(got.data - want).max() <= 1e-9


def test_boundary_renormalization_option():
    rng = Rng(89)
    params = DynamicConvParams(4, 4, 3, n_groups=2, rng=rng.child(0))
    x = rng.uniform(-1, 1, (5, 4))
    h = glu_numpy(
        x,
        params.glu_lin_w.data,
        params.glu_lin_b.data,
        params.glu_gate_w.data,
        params.glu_gate_b.data,
    )
    for renorm in (False, True):
        got = dynamic_conv1d(Tensor(x), params, renormalize=renorm)
        want = loop_dynamic1d(
            h, oracle_kernel_pred(params), params.point_w.data, 2,
            [p[0] for p in params.points], renormalize=renorm,
        )
        assert np.abs(got.data - want).max() <= 1e-9
    plain = dynamic_conv1d(Tensor(x), params)
    renormed = dynamic_conv1d(Tensor(x), params, renormalize=True)
    assert np.abs(plain.data - renormed.data)[[0, -1]].max() > 1e-6  # edges differ
    assert np.abs(plain.data - renormed.data)[1:-1].max() <= 1e-12  # interior identical


def test_center_kernel_size_one_is_pointwise_mix():
    rng = Rng(97)
    params = DynamicConvParams(4, 4, 1, n_groups=4, rng=rng.child(0))
    x = rng.uniform(-1, 1, (6, 4))
    out = dynamic_conv1d(Tensor(x), params)
    h = glu_numpy(
        x,
        params.glu_lin_w.data,
        params.glu_lin_b.data,
        params.glu_gate_w.data,
        params.glu_gate_b.data,
    )
    # a single window slot always gets softmax weight 1; output reduces
    # to the pointwise projection of the gated feature
    assert np.abs(out.data - h @ params.point_w.data.T).max() <= 1e-12


def test_gradients_through_glu_and_kernel():
    rng = Rng(101)
    params = DynamicConvParams(4, 3, 3, n_groups=2, rng=rng.child(0))
    x = Tensor(rng.uniform(-1, 1, (5, 4)))
    probe = Tensor(rng.uniform(-1, 1, (5, 3)))

    def f():
        return (dynamic_conv1d(x, params) * probe).sum()

    assert finite_diff_check(f, params.parameters()) <= 1e-4


def test_gradients_with_renormalization():
    rng = Rng(103)
    params = DynamicConvParams(4, 2, 3, n_groups=2, rng=rng.child(0))
    x = Tensor(rng.uniform(-1, 1, (4, 4)))

    def f():
        return dynamic_conv1d(x, params, renormalize=True).sum()

    assert finite_diff_check(f, params.parameters()) <= 1e-4


def test_predictor_cost_scales_with_groups():
    rng = Rng(107)
    n = 6
    counts = {}
    for n_groups in (2, 4):
        params = DynamicConvParams(8, 8, 3, n_groups=n_groups, rng=rng.child(n_groups))
        x = Tensor(rng.uniform(-1, 1, (n, 8)))
        with counting() as c:
            dynamic_conv1d(x, params)
        counts[n_groups] = c.macs
    # doubling the groups adds exactly one extra n*c*n_k predictor block
    assert counts[4] - counts[2] == n * 8 * 2 * 3


def test_validation():
    rng = Rng(109)
    with pytest.raises(ShapeMismatch):
        DynamicConvParams(6, 6, 3, n_groups=4, rng=rng)
    with pytest.raises(ContractViolation):
        DynamicConvParams(8, 8, 4, n_groups=4, rng=rng)
    params = DynamicConvParams(8, 8, 3, n_groups=4, rng=rng)
    with pytest.raises(ShapeMismatch):
        dynamic_conv1d(Tensor(np.zeros((5, 6))), params)
    with pytest.raises(ContractViolation):
        dynamic_conv2d(Tensor(np.zeros((9, 8))), params, (3, 3))
    params2 = DynamicConvParams(8, 8, 3, n_groups=4, rng=rng, ndim=2)
    with pytest.raises(ShapeMismatch):
        dynamic_conv2d(Tensor(np.zeros((8, 8))), params2, (3, 3))
