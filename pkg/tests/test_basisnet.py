import csv
import math

import numpy as np
import pytest

from basisformer.basisnet import (
    BasisNet, FixedBasis, normalize_timestamp, split_basis, write_basis_csv,
)
from basisformer.config import ConfigError
from basisformer.diffcore import concat, grad_check, tensor
from oracles import linear_loop, relu_loop


@pytest.mark.parametrize("t,T,expected", [(0, 100, 0.0), (25, 100, 0.25), (99, 100, 0.99)])
def test_normalize_timestamp(t, T, expected):
    assert normalize_timestamp(t, T) == expected


@pytest.mark.parametrize("t", [-1, 100])
def test_normalize_timestamp_out_of_range(t):
    with pytest.raises(ValueError):
        normalize_timestamp(t, 100)


def test_generate_basis_shape_default_sizes():
    net = BasisNet(10, 96 + 96, np.random.default_rng(0))
    z = net(0.3)
    assert z.shape == (10, 192)
    assert net(np.array([0.1, 0.2, 0.3])).shape == (3, 10, 192)


def test_generate_basis_is_deterministic():
    net = BasisNet(3, 7, np.random.default_rng(1), hidden=8)
    assert np.array_equal(net(0.42).data, net(0.42).data)


def test_zero_weights_give_final_bias():
    net = BasisNet(2, 3, np.random.default_rng(0), hidden=4)
    for layer in (net.l1, net.l2, net.l3, net.l4):
        layer.weight.data[...] = 0.0
    net.l4.bias.data[...] = np.arange(6.0)
    assert np.array_equal(net(0.7).data, np.arange(6.0).reshape(2, 3))


def test_forward_matches_hand_evaluation():
    rng = np.random.default_rng(3)
    net = BasisNet(2, 3, rng, hidden=4)
    tau = 0.37
    L = [(net.l1.weight.data, net.l1.bias.data), (net.l2.weight.data, net.l2.bias.data),
         (net.l3.weight.data, net.l3.bias.data), (net.l4.weight.data, net.l4.bias.data)]
    x = np.array([[tau]])
    h1 = relu_loop(linear_loop(x, *L[0]))
    h2 = relu_loop(linear_loop(h1, *L[1])) + h1
    h3 = relu_loop(linear_loop(h2, *L[2]))
    out = linear_loop(h3, *L[3]).reshape(2, 3)
    np.testing.assert_allclose(net(tau).data, out, atol=1e-12)


def test_basis_gradient_check():
    rng = np.random.default_rng(4)
    net = BasisNet(2, 5, rng, hidden=6, activation="gelu")
    w = tensor(rng.normal(size=(3, 2, 5)))
    taus = np.array([0.1, 0.5, 0.9])
    rep = grad_check(lambda: (net(taus) * w).sum() + (net(taus) ** 2).sum(),
                     net.parameters(), h=1e-5)
    assert rep.max_rel_err < 1e-4, rep.failures


def test_split_basis():
    z = tensor([[1.0, 2.0, 3.0, 4.0]])
    zx, zy = split_basis(z, 2)
    assert zx.data.tolist() == [[1.0, 2.0]] and zy.data.tolist() == [[3.0, 4.0]]
    assert np.array_equal(concat([zx, zy], axis=-1).data, z.data)
    zx, zy = split_basis(tensor(np.zeros((5, 96 + 192))), 96)
    assert zx.shape == (5, 96) and zy.shape == (5, 192)


def test_fixed_sine_grid_direct_evaluation():
    fb = FixedBasis("fixed-sine-grid", 4, 4, 4)
    z = fb(0.0).data
    assert z.shape == (4, 8)
    freqs = [0.25, 0.5]  # periods I=4 down to 2
    for r, f in enumerate(freqs):
        for t in range(8):
            assert z[r, t] == pytest.approx(math.sin(2 * math.pi * f * t), abs=1e-12)
            assert z[2 + r, t] == pytest.approx(math.cos(2 * math.pi * f * t), abs=1e-12)
    assert z[0, 0] == 0.0
    assert np.max(np.abs(z)) == pytest.approx(1.0)
    assert fb.parameters() == []


def test_fixed_sine_grid_rejects_odd_n():
    with pytest.raises(ConfigError):
        FixedBasis("fixed-sine-grid", 5, 8, 8)


def test_random_sine_seeded():
    a = FixedBasis("random-sine", 6, 16, 8, seed=7)(0.2).data
    b = FixedBasis("random-sine", 6, 16, 8, seed=7)(0.9).data
    c = FixedBasis("random-sine", 6, 16, 8, seed=8)(0.2).data
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert a.shape == (6, 24)


def test_fixed_basis_batched():
    fb = FixedBasis("fixed-sine-grid", 4, 6, 6)
    z = fb(np.array([0.1, 0.2]))
    assert z.shape == (2, 4, 12) and not z.requires_grad


def test_write_basis_csv(tmp_path):
    z = np.arange(12.0).reshape(3, 4)
    path = tmp_path / "basis.csv"
    write_basis_csv(z, path, I=2)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["t0", "t1", "t2", "t3", "boundary"]
    assert len(rows) == 4
    assert [float(v) for v in rows[1][:4]] == [0.0, 1.0, 2.0, 3.0] and rows[1][4] == "2"
