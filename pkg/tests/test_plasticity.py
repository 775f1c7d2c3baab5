import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import dualsolver.plasticity as pl
from dualsolver.errors import InadmissibleState, NonConvexInner
from dualsolver.plasticity import DualPointValue, PlasticAuxPotential, SlipGeometry

MODELS = [pl.RateDependentModel, pl.RateIndependentModel]
GEOMS = [SlipGeometry.single, SlipGeometry.planar_double]


def _setup(Model, geom=SlipGeometry.single, **pot_kw):
    model = Model(geometry=geom())
    layout = pl.layout_for(model)
    return model, layout, PlasticAuxPotential(layout, pl.default_base(model), **pot_kw)


def _random_state(layout, rng, nslip):
    s = layout.slices
    U = np.zeros(layout.size)
    U[s["F"]] = (np.eye(3) + 0.05 * rng.standard_normal((3, 3))).ravel()
    U[s["P"]] = (np.eye(3) + 0.02 * rng.standard_normal((3, 3))).ravel()
    U[s["g"]] = rng.uniform(0.3, 0.6, nslip)
    for b in ("y", "v", "r", "s", "p"):
        if b in s:
            U[s[b]] = 0.1 * rng.standard_normal(s[b].stop - s[b].start)
    return U


def _fd_lagrangian_grad(model, pot, U, D, h=1e-5):
    E = np.eye(U.size) * h
    L = lambda X: pl.lagrangian(model, pot, X, D)
    return (8 * (L(U + E) - L(U - E)) - (L(U + 2 * E) - L(U - 2 * E))) / (12 * h)


# geometry and models

def test_slip_geometry_validation():
    with pytest.raises(ValueError):
        SlipGeometry([[1.0, 0, 0]], [[1.0, 0, 0]])
    with pytest.raises(ValueError):
        SlipGeometry([[2.0, 0, 0]], [[0, 1.0, 0]])
    g = SlipGeometry.planar_double()
    assert g.nslip == 2
    np.testing.assert_allclose(np.trace(g.schmid, axis1=1, axis2=2), 0, atol=1e-15)


@pytest.mark.parametrize("Model", MODELS)
@pytest.mark.parametrize("geom", GEOMS)
def test_model_partials_match_finite_differences(Model, geom):
    assert pl.check_model_partials(Model(geometry=geom()), rng=3) < 1e-6


def test_zero_stress_yield_is_minus_g():
    model = pl.RateIndependentModel(geometry=SlipGeometry.planar_double())
    rng = np.random.default_rng(0)
    P = (np.eye(3) + 0.1 * rng.standard_normal((3, 3)))[None]
    g = np.array([[0.3, 0.7]])
    # F = P gives an unstretched elastic part
    tau = model.resolved_shear(P, P)
    np.testing.assert_allclose(tau, 0, atol=1e-14)
    np.testing.assert_allclose(model.yield_function(tau, g), -g)
    np.testing.assert_allclose(model.stress(P, P), 0, atol=1e-14)


def test_simple_shear_resolved_stress_small_strain():
    model = pl.RateIndependentModel()
    F = np.eye(3)[None].copy()
    F[0, 0, 1] = 1e-4
    # linear elasticity: tau = mu * shear
    assert model.resolved_shear(F, np.eye(3)[None])[0, 0] == pytest.approx(1e-4, rel=1e-3)


@pytest.mark.parametrize("Model", MODELS)
def test_inadmissible_states_raise(Model):
    model, layout, pot = _setup(Model)
    D = DualPointValue.zeros(layout.kind, 1)
    U = pot.base.copy()
    U[layout.slices["F"]] = np.diag([1.0, 1.0, -1.0]).ravel()
    with pytest.raises(InadmissibleState):
        pl.residual(model, pot, U, D)
    U = pot.base.copy()
    U[layout.slices["g"]] = 0.0
    with pytest.raises(InadmissibleState):
        pl.residual(model, pot, U, D)


# containers

def test_dual_point_value_shapes():
    D = DualPointValue.zeros("ri", 2)
    assert D["rho"].shape == (2,) and D["Pi"].shape == (3, 3)
    with pytest.raises(ValueError):
        DualPointValue("rd", 1, {"rho": np.zeros(1)})
    with pytest.raises(ValueError):
        DualPointValue("rd", 1, {"Pi": np.zeros(3)})
    flat = np.arange(D.flat().size, dtype=float)
    np.testing.assert_array_equal(DualPointValue.from_flat("ri", 2, flat).flat(), flat)
    with pytest.raises(ValueError):
        DualPointValue.from_flat("ri", 2, flat[:-1])


def test_aux_potential_validation():
    layout = pl.Layout("rd", 1)
    base = np.zeros(layout.size)
    with pytest.raises(ValueError):
        PlasticAuxPotential(layout, base, a={"F": -1.0})
    with pytest.raises(ValueError):
        PlasticAuxPotential(layout, base, a={"F": 0.0})
    with pytest.raises(ValueError):
        PlasticAuxPotential(layout, base, p=2.0)
    with pytest.raises(ValueError):
        PlasticAuxPotential(layout, base, a={"r": 1.0})
    PlasticAuxPotential(layout, base, a={"F": 0.0}, b={"F": 1.0})


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(["rd", "ri"]), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_layout_pack_roundtrip(kind, nslip, seed):
    layout = pl.Layout(kind, nslip)
    U = np.random.default_rng(seed).standard_normal((4, layout.size))
    np.testing.assert_array_equal(layout.pack(**layout.unpack(U)), U)


# residuals

@pytest.mark.parametrize("Model", MODELS)
@pytest.mark.parametrize("geom", GEOMS)
def test_residual_vanishes_at_base_for_zero_dual(Model, geom):
    model, layout, pot = _setup(Model, geom, b={"F": 1.0, "g": 2.0})
    R = pl.residual(model, pot, pot.base, DualPointValue.zeros(layout.kind, model.nslip))
    assert np.all(R == 0)


@pytest.mark.parametrize("Model", MODELS)
@pytest.mark.parametrize("geom", GEOMS)
def test_residual_is_gradient_of_lagrangian(Model, geom):
    rng = np.random.default_rng(11)
    model = Model(geometry=geom())
    layout = pl.layout_for(model)
    for _ in range(3):
        U = _random_state(layout, rng, model.nslip)
        pot = PlasticAuxPotential(layout, U + 0.01 * rng.standard_normal(U.size),
                                  b={"F": 1.0, "P": 0.5})
        D = DualPointValue.random(layout.kind, model.nslip, rng, 0.5)
        fd = _fd_lagrangian_grad(model, pot, U, D)
        np.testing.assert_allclose(pl.residual(model, pot, U, D)[0], fd, atol=1e-9)


def test_decoupled_p_block_reduction():
    # lam = mu = 0 kills stress and slip rate, h0 = 0 kills hardening
    model = pl.RateDependentModel(lam=0.0, mu=0.0, h0=0.0)
    layout = pl.layout_for(model)
    pot = PlasticAuxPotential(layout, pl.default_base(model), a={"P": 10.0})
    dt_Pi = np.zeros((3, 3))
    dt_Pi[0, 0] = 1.0
    D = DualPointValue.zeros("rd", 1).replace(dt_Pi=dt_Pi)
    U = pot.base.copy()
    U[layout.slices["P"].start] += 0.1
    np.testing.assert_allclose(pl.residual(model, pot, U, D)[0], 0, atol=1e-15)
    Us, rep = pl.dtp_solve_rd(model, pot, D)
    np.testing.assert_allclose(Us, U, atol=1e-13)


def test_v_block_hand_solution():
    model, layout, pot = _setup(pl.RateDependentModel, a={"v": 2.0})
    e1 = np.array([1.0, 0, 0])
    D = DualPointValue.zeros("rd", 1).replace(dt_gamma=e1, xi=e1)
    U = pot.base.copy()
    U[layout.slices["v"]] += e1
    R = layout.unpack(pl.residual(model, pot, U, D))
    np.testing.assert_allclose(R["v"], 0, atol=1e-15)


@pytest.mark.parametrize("sbar,expected", [(0.0, 0.0), (1.0, 0.5)])
def test_s_block_scalar_solve(sbar, expected):
    model, layout, pot = _setup(pl.RateIndependentModel, a={"s": 2.0})
    base = pot.base.copy()
    base[layout.slices["s"]] = sbar
    pot = pot.with_base(base)
    D = DualPointValue.zeros("ri", 1).replace(rho=np.ones(1))
    U = base.copy()
    U[layout.slices["s"]] = expected
    assert layout.unpack(pl.residual(model, pot, U, D))["s"][0, 0] == pytest.approx(0, abs=1e-15)
    U[layout.slices["s"]] = expected + 0.1
    assert layout.unpack(pl.residual(model, pot, U, D))["s"][0, 0] != pytest.approx(0, abs=1e-3)


def test_p_block_scalar_solve_and_singular_weight():
    model, layout, pot = _setup(pl.RateIndependentModel, a={"p": 2.0})
    base = pot.base.copy()
    base[layout.slices["p"]] = 1.0
    pot = pot.with_base(base)
    sl = layout.slices["p"]
    # nu = 0.5: p = a_p pbar / (a_p - 2 nu) = 2
    D = DualPointValue.zeros("ri", 1).replace(nu=np.array([0.5]))
    U = base.copy()
    U[sl] = 2.0
    assert layout.unpack(pl.residual(model, pot, U, D))["p"][0, 0] == pytest.approx(0, abs=1e-15)
    # nu = 1 makes a_p = 2 nu: the p-block is constant in p and has no root
    D = DualPointValue.zeros("ri", 1).replace(nu=np.ones(1))
    vals = []
    for p in (-1.0, 0.0, 3.0):
        U[sl] = p
        vals.append(layout.unpack(pl.residual(model, pot, U, D))["p"][0, 0])
    np.testing.assert_allclose(vals, -2.0)


def test_slip_kinematics_coupling_term():
    model = pl.RateDependentModel(geometry=SlipGeometry.planar_double())
    layout = pl.layout_for(model)
    rng = np.random.default_rng(5)
    pot = PlasticAuxPotential(layout, pl.default_base(model, g=0.2))
    Pi = rng.standard_normal((3, 3))
    D = DualPointValue.zeros("rd", 2).replace(Pi=Pi)
    D0 = DualPointValue.zeros("rd", 2)
    sl = layout.slices

    def coupling(U):
        b = layout.unpack(U)
        r = model.slip_rate(model.resolved_shear(b["F"], b["P"]), b["g"])
        SP = np.einsum("aik,bkj->baij", model.geometry.schmid, b["P"])
        return -np.einsum("ba,ij,baij->b", r, Pi, SP)

    U = pot.base + 0.01 * rng.standard_normal(layout.size)
    dL = pl.lagrangian(model, pot, U, D) - pl.lagrangian(model, pot, U, D0)
    np.testing.assert_allclose(dL, coupling(U[None]), rtol=1e-12)
    dR = pl.residual(model, pot, U, D)[0] - pl.residual(model, pot, U, D0)[0]
    h = 1e-6
    for k in range(sl["F"].start, sl["g"].stop):
        e = np.zeros(layout.size)
        e[k] = h
        fd = (coupling((U + e)[None]) - coupling((U - e)[None]))[0] / (2 * h)
        assert dR[k] == pytest.approx(fd, abs=1e-6)


def test_index_discipline_under_slip_permutation():
    geom = SlipGeometry.planar_double(angle=0.9)
    model = pl.RateIndependentModel(geometry=geom, q_lat=1.4)
    layout = pl.layout_for(model)
    rng = np.random.default_rng(2)
    U = _random_state(layout, rng, 2)
    pot = PlasticAuxPotential(layout, U + 0.01 * rng.standard_normal(U.size))
    D = DualPointValue.random("ri", 2, rng, 0.5)
    order = [1, 0]
    perm = layout.permutation(order)
    model_p = pl.RateIndependentModel(geometry=geom.permuted(order), q_lat=1.4)
    pot_p = pot.with_base(pot.base[perm])
    R = pl.residual(model, pot, U, D)[0]
    Rp = pl.residual(model_p, pot_p, U[perm], D.permuted(order))[0]
    np.testing.assert_allclose(Rp, R[perm], atol=1e-14)
    # relabeling slip duals alone is not a symmetry
    assert np.abs(pl.residual(model, pot, U, D.permuted(order))[0] - R).max() > 1e-3


# DtP solves

@pytest.mark.parametrize("Model", MODELS)
@pytest.mark.parametrize("geom", GEOMS)
def test_zero_dual_returns_base(Model, geom):
    model, layout, pot = _setup(Model, geom, b={"P": 1.0})
    U, rep = pl.dtp_solve(model, pot, DualPointValue.zeros(layout.kind, model.nslip))
    assert np.array_equal(U, pot.base)
    assert rep.iterations <= 1
    assert rep.min_eig > 0


@pytest.mark.parametrize("Model", MODELS)
def test_dtp_matches_minimization_oracle(Model):
    model, layout, pot = _setup(Model)
    rng = np.random.default_rng(7)
    for _ in range(5):
        D = DualPointValue.random(layout.kind, 1, rng, 1e-2)
        U, rep = pl.dtp_solve(model, pot, D)
        assert rep.residual_norm <= 1e-12 * max(1.0, D.norm())
        assert rep.jacobian_asymmetry < 1e-8
        np.testing.assert_allclose(U, pl.minimize_lagrangian(model, pot, D), atol=1e-8)


def test_single_slip_pi11_example_matches_oracle():
    model, layout, pot = _setup(pl.RateDependentModel)
    Pi = np.zeros((3, 3))
    Pi[0, 0] = 0.01
    D = DualPointValue.zeros("rd", 1).replace(Pi=Pi)
    U, rep = pl.dtp_solve_rd(model, pot, D)
    np.testing.assert_allclose(U, pl.minimize_lagrangian(model, pot, D), atol=1e-8)
    assert np.abs(U - pot.base).max() > 0


@pytest.mark.parametrize("Model", MODELS)
def test_perturbation_is_first_order(Model):
    model, layout, pot = _setup(Model)
    rng = np.random.default_rng(9)
    d = DualPointValue.random(layout.kind, 1, rng, 1.0)
    d = DualPointValue.from_flat(layout.kind, 1, d.flat() / d.norm())
    dev = []
    for eps in (1e-4, 1e-5):
        D = DualPointValue.from_flat(layout.kind, 1, eps * d.flat())
        U, rep = pl.dtp_solve(model, pot, D)
        dU = np.linalg.norm(U - pot.base)
        # the residual at base is linear in D and bounds the deviation
        R0 = np.linalg.norm(pl.residual(model, pot, pot.base, D))
        assert dU <= 1.01 * R0 / rep.min_eig
        dev.append(dU)
    assert dev[0] / dev[1] == pytest.approx(10.0, rel=1e-2)


def test_kind_mismatch_rejected():
    model, layout, pot = _setup(pl.RateDependentModel)
    with pytest.raises(ValueError):
        pl.dtp_solve_ri(model, pot, DualPointValue.zeros("rd", 1))
    with pytest.raises(ValueError):
        pl.dtp_solve(model, pot, DualPointValue.zeros("ri", 1))


@pytest.mark.parametrize("Model", MODELS)
def test_nonconvex_inner_reports_eigenvalue(Model):
    # for the rate-independent model the residual vanishes at base here, so
    # the solve must still reject the saddle point
    model, layout, pot = _setup(Model)
    D = DualPointValue.zeros(layout.kind, 1).replace(Pi=50 * np.eye(3))
    with pytest.raises(NonConvexInner) as exc:
        pl.dtp_solve(model, pot.scaled(0.1, ["P"]), D)
    assert exc.value.min_eig < 0
    assert "weights" in str(exc.value)


# convexity audit

@pytest.mark.parametrize("Model", MODELS)
def test_audit_quadratic_zero_dual_gives_min_weight(Model):
    model, layout, pot = _setup(Model, a={"g": 3.0, "F": 7.0})
    rep = pl.convexity_audit(model, pot, DualPointValue.zeros(layout.kind, 1), rng=0,
                             samples=5)
    assert rep.min_eig == pytest.approx(3.0, abs=1e-7)
    assert rep.weight_scale == 1.0 and rep.positive_definite


@pytest.mark.parametrize("Model", MODELS)
def test_audit_default_weights_positive_definite(Model):
    model, layout, pot = _setup(Model)
    rng = np.random.default_rng(4)
    for _ in range(5):
        D = DualPointValue.random(layout.kind, 1, rng, 1e-2)
        assert pl.convexity_audit(model, pot, D, rng=rng, samples=8).positive_definite


def test_audit_suggests_p_weight_scale_up():
    model, layout, pot = _setup(pl.RateIndependentModel)
    D = DualPointValue.zeros("ri", 1).replace(Pi=50 * np.eye(3))
    weak = pot.scaled(0.1, ["P"])
    rep = pl.convexity_audit(model, weak, D, rng=0, samples=6)
    assert rep.min_eig < 0
    assert rep.dominant_block == "P"
    assert 1.0 < rep.block_scale < np.inf
    fixed = weak.scaled(rep.block_scale, ["P"])
    assert pl.convexity_audit(model, fixed, D, rng=0, samples=6).positive_definite
    uniform = weak.scaled(rep.weight_scale)
    assert pl.convexity_audit(model, uniform, D, rng=0, samples=6).positive_definite


def test_power_law_eigenvalue_grows_with_distance():
    model, layout, pot = _setup(pl.RateDependentModel, a={"F": 1.0}, b={"F": 1.0})
    D = DualPointValue.zeros("rd", 1)
    sl = layout.slices["F"]
    direction = np.random.default_rng(0).standard_normal(9)
    direction /= np.linalg.norm(direction)
    for dist in (0.0, 0.1, 0.3):
        U = pot.base.copy()
        U[sl] += dist * direction
        J = pl.fd_jacobian(model, pot, U, D)
        # Hessian of |d|^4 / 4 is |d|^2 I + 2 d d^T
        assert np.linalg.eigvalsh(0.5 * (J + J.T))[0] == pytest.approx(1 + dist**2, abs=1e-7)


# slack semantics

def test_constraint_rows_driven_to_zero():
    model, layout, pot = _setup(pl.RateIndependentModel)
    rng = np.random.default_rng(8)
    for _ in range(5):
        D = DualPointValue.random("ri", 1, rng, 1e-2)
        D2, U, rows = pl.enforce_constraint_rows(model, pot, D)
        for row in rows:
            assert np.abs(row).max() < 1e-8
        b = layout.unpack(U[None])
        Y = pl.yield_values(model, U[None])[0]
        np.testing.assert_allclose(b["r"][0], b["p"][0] ** 2, atol=1e-8)
        assert np.all(b["r"][0] >= -1e-8) and np.all(Y <= 1e-8)
        np.testing.assert_allclose(D2["mu"], D["mu"])


def test_default_base_rejects_plastic_state():
    with pytest.raises(ValueError):
        pl.default_base(pl.RateIndependentModel(), shear=0.5, g=0.1)
