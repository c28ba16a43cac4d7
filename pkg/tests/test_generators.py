from __future__ import annotations

import numpy as np
import pytest

from gridcascade.dcflow import solve_flows
from gridcascade.errors import DisconnectedEnsembleError, ParamRangeError, ValidationError
from gridcascade.generators import (
    EnsembleSpec,
    assign_operating_point,
    distant_cascade_weak_lines,
    fixture,
    generate,
)
from gridcascade.grid import admittance_matrix, bridges, components
from gridcascade.spectral import kirchhoff_index, pseudo_inverse


def edge_list(g):
    return list(zip(g.u.tolist(), g.v.tolist()))


class TestEnsembles:
    def test_deterministic(self):
        spec = EnsembleSpec("er", 30, p=0.3, seed=7)
        assert edge_list(generate(spec)) == edge_list(generate(spec))
        assert edge_list(generate(spec)) != edge_list(generate(EnsembleSpec("er", 30, p=0.3, seed=8)))

    def test_ws_ring_lattice(self):
        g = generate(EnsembleSpec("ws", 20, p=0.0, k=4, seed=0))
        assert np.all(np.bincount(np.concatenate([g.u, g.v]), minlength=20) == 4)

    def test_ba_edge_count(self):
        n, k = 50, 3
        g = generate(EnsembleSpec("ba", n, k=k, seed=1))
        assert g.n_lines == k * (k + 1) // 2 + k * (n - k - 1)

    def test_ba_heavy_tail(self):
        for seed in range(20):
            g = generate(EnsembleSpec("ba", 50, k=3, seed=seed))
            deg = np.bincount(np.concatenate([g.u, g.v]))
            assert deg.max() > 2 * deg.mean()

    def test_simple_connected_unit(self):
        for model in ("er", "ws", "ba"):
            g = generate(EnsembleSpec.reference_default(model, 60, seed=3) if model != "er" else EnsembleSpec("er", 60, p=0.15, seed=3))
            assert len(components(g)) == 1
            assert len(set(edge_list(g))) == g.n_lines
            assert g.is_unit_reactance() and np.all(g.powers == 0) and np.all(np.isinf(g.capacity))

    def test_disconnected(self):
        with pytest.raises(DisconnectedEnsembleError):
            generate(EnsembleSpec("er", 50, p=0.001, seed=0))

    @pytest.mark.parametrize("kwargs", [{"model": "xx"}, {"p": 0.0}, {"p": 1.5}, {"n": 1}])
    def test_invalid_spec(self, kwargs):
        with pytest.raises(ValidationError):
            EnsembleSpec(**{"model": "er", "n": 10, "p": 0.5, **kwargs})

    def test_reference_defaults(self):
        assert EnsembleSpec.reference_default("er") == EnsembleSpec("er", 1374, p=0.01)
        assert EnsembleSpec.reference_default("ws").k == 4 and EnsembleSpec.reference_default("ws").p == 0.1
        assert EnsembleSpec.reference_default("ba").k == 3

    @pytest.mark.slow
    def test_kirchhoff_band(self):
        for p in (0.1, 0.2, 0.4):
            for seed in range(30):
                g = generate(EnsembleSpec("er", 200, p=p, seed=seed))
                kf = kirchhoff_index(pseudo_inverse(admittance_matrix(g)))
                assert 0.5 <= kf * p / 200 <= 3.5


class TestOperatingPoint:
    def test_margins(self):
        g = assign_operating_point(generate(EnsembleSpec("er", 40, p=0.2, seed=2)), fos=1.1, seed=2)
        f = np.abs(solve_flows(g, pseudo_inverse(admittance_matrix(g))).flows)
        busy = f > 1e-9 * f.max()
        assert np.allclose(g.capacity[busy] / f[busy], 1.1)
        assert np.all(g.capacity > f)

    def test_zero_flow_floor(self):
        g = assign_operating_point(generate(EnsembleSpec("ws", 20, p=0.0, k=4, seed=0)), n_sd=1, seed=4)
        f = np.abs(solve_flows(g, pseudo_inverse(admittance_matrix(g))).flows)
        assert np.all(g.capacity > 0)
        zero = f <= 1e-9 * f.max()
        if zero.any():
            assert np.allclose(g.capacity[zero], 1.1 * f.mean())

    def test_pm1_balanced(self):
        g = assign_operating_point(generate(EnsembleSpec("er", 40, p=0.2, seed=5)), n_sd=10, seed=5)
        assert g.powers.sum() == 0.0
        assert sorted(np.unique(g.powers).tolist()) == [-1.0, 0.0, 1.0]
        assert (g.powers == 1).sum() == 10 == (g.powers == -1).sum()

    def test_normal_slack(self):
        g = assign_operating_point(generate(EnsembleSpec("er", 30, p=0.2, seed=6)), mode="normal", seed=6)
        assert g.powers[-1] == pytest.approx(-g.powers[:-1].sum(), abs=1e-12)
        draws = np.random.default_rng(6).standard_normal(30)
        assert np.allclose(g.powers[:-1], draws[:-1])

    def test_bad_mode(self):
        with pytest.raises(ValidationError):
            assign_operating_point(generate(EnsembleSpec("er", 20, p=0.3)), mode="uniform")

    def test_reproducible(self):
        topo = generate(EnsembleSpec("ba", 30, k=2, seed=1))
        a = assign_operating_point(topo, seed=3)
        b = assign_operating_point(topo, seed=3)
        assert np.array_equal(a.powers, b.powers) and np.array_equal(a.capacity, b.capacity)


class TestFixtures:
    def test_obs61(self):
        g = fixture("obs61")
        assert (g.n_buses, g.n_lines) == (4, 5)
        assert g.capacity.tolist() == [30, 30, 20, 20, 20]
        assert g.line(0).endpoints == g.line(1).endpoints == (0, 3)

    def test_obs62(self):
        g = fixture("obs62", m=4, eps=0.2)
        assert g.capacity == pytest.approx([1, 4 / 3 - 0.2, 2 - 0.2, 4 - 0.2])
        assert g.powers.tolist() == [4.0, -4.0]

    def test_obs64_x_minus(self):
        base = fixture("obs64_base", m=4, eps=0.1)
        x = fixture("obs64_x_minus", m=4, eps=0.1, mu=0.1)
        assert np.array_equal(base.capacity, x.capacity)
        assert x.reactance.tolist() == [1.0, 0.9, 1.0, 1.0]

    def test_obs64_c_minus(self):
        base = fixture("obs64_base", m=4, eps=0.1)
        c = fixture("obs64_c_minus", m=4, eps=0.1)
        assert c.capacity[1] == pytest.approx(base.capacity[1] - 0.1)
        assert np.array_equal(np.delete(c.capacity, 1), np.delete(base.capacity, 1))

    def test_obs63_structure(self):
        l, d = 4, 7
        g = fixture("obs63", l=l, d=d)
        assert g.n_buses == 2 + l * (d - 2) and g.n_lines == 1 + l * (d - 1)
        assert g.reactance[0] == g.meta["mu"]
        weak = distant_cascade_weak_lines(l, d)
        assert g.capacity[weak] == pytest.approx([l / (l - i) - g.meta["eps"] for i in range(l)])
        assert not bridges(g)

    @pytest.mark.parametrize(
        "name, params",
        [
            ("obs62", {"m": 4, "eps": 0.5}),
            ("obs62", {"m": 1}),
            ("obs63", {"l": 3, "d": 5, "eps": 0.6}),
            ("obs63", {"l": 3, "d": 5, "mu": 100.0}),
            ("obs63", {"l": 3, "d": 6}),
            ("obs64_x_minus", {"m": 4, "mu": 0.5}),
            ("obs51", {"x1": 0.0}),
            ("obs61", {"m": 3}),
        ],
    )
    def test_param_range(self, name, params):
        with pytest.raises(ParamRangeError):
            fixture(name, **params)

    def test_unknown(self):
        with pytest.raises(ValidationError):
            fixture("obs99")
