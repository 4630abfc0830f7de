import numpy as np
import pytest

from fibresplit.bundle import (BundleChart, TangentPointM, liouville_fields,
                               vertical_endomorphism)
from fibresplit.errors import (DimensionMismatch, NotPrincipal,
                               SingularMatrix)
from fibresplit.exprs import VarContext, compile_field
from fibresplit.lagrangian import (LagrangianSpec, induced_splitting,
                                   integrate_sode)
from fibresplit.reduction import (ActionSpec, DecouplingReport, MagneticModel,
                                  ReducedBaseLagrangian, base_euler_lagrange,
                                  connection_test_domega, decoupling_check,
                                  integrate_base, integrate_magnetic,
                                  invariance_check, magnetic_induced_splitting,
                                  magnetic_lp_system, momentum_map, omega,
                                  principal_check, unreduce,
                                  vilms_of_sode, vilms_principal_check,
                                  xi_field)
from fibresplit.splitting import SplittingSpec

CH = BundleChart(1, 1)


def trivial_action(chart=CH):
    return ActionSpec.from_expressions(
        chart, [["1" if i == j else "0" for j in range(chart.m)]
                for i in range(chart.m)])


def base_field(src):
    ctx = VarContext([("base", ["x1"]), ("base_velocity", ["v1"])])
    return compile_field(src, ctx, label=src)


def test_structure_constant_guards():
    with pytest.raises(DimensionMismatch):
        ActionSpec.from_expressions(CH, [["1"]], C=np.zeros((2, 2, 2)))
    with pytest.raises(ValueError, match="antisymmetric"):
        ActionSpec.from_expressions(CH, [["1"]], C=np.ones((1, 1, 1)))
    # [e1,e2] = e2 and [e1,e3] = e1 break the Jacobi identity
    ch3 = BundleChart(1, 3)
    C = np.zeros((3, 3, 3))
    C[1, 0, 1], C[1, 1, 0] = 1.0, -1.0
    C[0, 0, 2], C[0, 2, 0] = 1.0, -1.0
    eye = [["1" if i == j else "0" for j in range(3)] for i in range(3)]
    with pytest.raises(ValueError, match="Jacobi"):
        ActionSpec.from_expressions(ch3, eye, C=C)


def test_generator_frame_must_be_invertible():
    with pytest.raises(SingularMatrix):
        ActionSpec.from_expressions(CH, [["0"]])


def test_invariance_pass_and_fail():
    act = trivial_action()
    Lp = LagrangianSpec.from_expression(CH, "0.5*v1^2 + 0.5*w1^2 + w1*v1^2")
    assert invariance_check(Lp, act).max_residual == 0.0
    Lf = LagrangianSpec.from_expression(CH, "0.5*v1^2 + 0.5*w1^2 + y1*v1")
    assert invariance_check(Lf, act).max_residual > 0.5


def test_momentum_map_values():
    act = trivial_action()
    L = LagrangianSpec.from_expression(CH, "0.5*v1^2 + 0.5*w1^2")
    pt = TangentPointM(CH, [0.3], [0.1], [0.4], [1.7])
    assert abs(momentum_map(L, act, pt)[0] - 1.7) < 1e-14
    # on the image of the induced splitting the fibre momentum vanishes
    Lc = LagrangianSpec.from_expression(CH, "0.5*v1^2 + 0.5*w1^2 + w1*v1^2")
    h = induced_splitting(Lc)
    v = 0.6
    w = h.h_values([0.0], [0.0], [v])
    pt2 = TangentPointM(CH, [0.0], [0.0], [v], w)
    assert abs(momentum_map(Lc, act, pt2)[0]) < 1e-12


def test_principal_check_residuals():
    act = trivial_action()
    ok = SplittingSpec.from_expressions(CH, ["0.7*v1"])
    assert principal_check(ok, act).max_residual == 0.0
    induced = induced_splitting(
        LagrangianSpec.from_expression(CH, "0.5*v1^2 + 0.5*w1^2 + w1*v1^2"))
    assert principal_check(induced, act).max_residual < 1e-12
    bad = SplittingSpec.from_expressions(CH, ["y1*v1"])
    assert principal_check(bad, act).max_residual > 0.5


def test_omega_solves_frame_coordinates():
    act = ActionSpec.from_expressions(CH, [["2"]])
    h = SplittingSpec.from_expressions(CH, ["x1*v1"])
    pt = TangentPointM(CH, [0.5], [0.0], [1.0], [4.5])
    # w - h = 4.5 - 0.5, divided by the frame coefficient 2
    assert abs(omega(h, act, pt)[0] - 2.0) < 1e-14


def test_connection_test_flags_inhomogeneous_splittings():
    act = trivial_action()
    lin = SplittingSpec.from_expressions(CH, ["x1*v1"])
    assert connection_test_domega(lin, act).max_residual == 0.0
    quad = SplittingSpec.from_expressions(CH, ["v1^2"])
    rep = connection_test_domega(quad, act)
    assert 0.5 < rep.max_residual <= 1.0  # max sampled v^2 in a unit box


def test_xi_field_is_the_vertical_dilation():
    act = trivial_action()
    h = SplittingSpec.from_expressions(CH, ["x1*v1"])
    pt = TangentPointM(CH, [0.4], [-0.2], [0.9], [1.3])
    xi = xi_field(h, act, pt)
    s = vertical_endomorphism(xi)
    dv = liouville_fields(h.h_values, pt, "vertical")
    assert np.array_equal(s.as_array(), dv.as_array())
    # the fibre-acceleration block carries Kdot omega; constant frame: zero
    assert np.array_equal(xi.W, np.zeros(1))


def test_unreduce_oscillator_stays_horizontal():
    act = trivial_action()
    h = SplittingSpec.from_expressions(CH, ["0.7*v1"])
    gbar = base_euler_lagrange(base_field("0.5*v1^2 - 0.5*x1^2"), 1)
    sode = unreduce(gbar, h, act)
    assert sode.provenance == "unreduced"
    rec = integrate_sode(sode, [1.0, 0.0, 0.0, 0.0], 0.0, 10.0, 1e-3)
    assert abs(rec.final[0] - np.cos(10.0)) < 1e-8
    drift = np.abs(rec.states[:, 3] - 0.7 * rec.states[:, 2]).max()
    assert drift < 1e-12


def test_unreduce_rejects_incompatible_splitting():
    act = trivial_action()
    bad = SplittingSpec.from_expressions(CH, ["y1*v1"])
    gbar = base_euler_lagrange(base_field("0.5*v1^2"), 1)
    with pytest.raises(NotPrincipal):
        unreduce(gbar, bad, act)


def test_integrate_base_oscillator():
    gbar = base_euler_lagrange(base_field("0.5*v1^2 - 0.5*x1^2"), 1)
    rec = integrate_base(gbar, [1.0], [0.0], 0.0, 1.0, 1e-3)
    assert abs(rec.final[0] - np.cos(1.0)) < 1e-10
    with pytest.raises(DimensionMismatch):
        base_euler_lagrange(base_field("0.5*v1^2"), 2)


def test_vilms_of_sode_projects_to_horizontal_dilation():
    h = SplittingSpec.from_expressions(CH, ["x1*v1 + 0.1*v1^2"])
    gbar = base_euler_lagrange(base_field("0.5*v1^2 - 0.5*x1^2"), 1)
    pt = TangentPointM(CH, [0.4], [-0.2], [0.9], [1.3])
    lift = vilms_of_sode(gbar, h, pt)
    s = vertical_endomorphism(lift)
    dh = liouville_fields(h.h_values, pt, "horizontal")
    assert np.array_equal(s.as_array(), dh.as_array())
    # base acceleration block is the base force itself
    assert abs(lift.V[0] - gbar.force(pt.x, pt.v)[0]) < 1e-15


def test_vilms_principal_equivariance():
    act = trivial_action()
    sample = [(0, 0.3), (0, -0.2)]
    ok = SplittingSpec.from_expressions(CH, ["x1*v1"])
    rep = vilms_principal_check(ok, act, sample, state_samples=10)
    assert rep.max_residual < 1e-6
    bad = SplittingSpec.from_expressions(CH, ["y1*v1"])
    rep2 = vilms_principal_check(bad, act, sample, state_samples=10)
    assert rep2.max_residual > 0.05


def test_vilms_principal_nonconstant_frame():
    act = ActionSpec.from_expressions(CH, [["exp(y1)"]])
    h = SplittingSpec.from_expressions(CH, ["v1*exp(y1)"])
    assert principal_check(h, act, box=0.5).max_residual < 1e-12
    rep = vilms_principal_check(h, act, [(0, 0.2)], state_samples=8, box=0.5)
    assert rep.max_residual < 1e-4


# ---------------------------------------------------------------------------
# magnetic quasi-velocity systems


def test_magnetic_model_guards():
    with pytest.raises(ValueError, match="symmetric"):
        MagneticModel.from_expressions(1, 2, k=[[1.0, 0.3], [0.0, 1.0]])
    with pytest.raises(SingularMatrix):
        MagneticModel.from_expressions(1, 1, k=[[0.0]])
    with pytest.raises(ValueError, match="positive definite"):
        MagneticModel.from_expressions(1, 1, g=[["-1"]])
    # [e1,e2] = e1 has no bi-invariant euclidean metric
    C = np.zeros((2, 2, 2))
    C[0, 0, 1], C[0, 1, 0] = 1.0, -1.0
    with pytest.raises(ValueError, match="bi-invariant"):
        MagneticModel.from_expressions(1, 2, C=C)


def test_magnetic_rhs_trivial_model():
    model = MagneticModel.from_expressions(1, 1)
    sys = magnetic_lp_system(model)
    rhs = sys.rhs(0.0, np.array([0.3, 0.5, 0.2]))
    assert np.array_equal(rhs, np.array([0.5, 0.0, 0.0]))


def test_magnetic_rhs_metric_term():
    model = MagneticModel.from_expressions(1, 1, g=[["exp(x1)"]])
    sys = magnetic_lp_system(model)
    for x, v in [(0.3, 0.7), (-0.5, 1.2)]:
        rhs = sys.rhs(0.0, np.array([x, v, 0.1]))
        assert abs(rhs[1] + 0.5 * v * v) < 1e-12  # geodesic: v' = -v^2/2


def test_magnetic_oscillator_and_momentum_transport():
    model = MagneticModel.from_expressions(1, 1, V="0.5*x1^2")
    sys = magnetic_lp_system(model)
    rec = integrate_magnetic(sys, [1.0, 0.0, 0.3], 0.0, 10.0, 1e-3)
    assert abs(rec.final[0] - np.cos(10.0)) < 1e-8
    # the fibre block is inert here: transported momentum is constant
    p = np.asarray(rec.diagnostics["p1"])
    assert np.abs(p - 0.3).max() == 0.0
    assert np.abs(rec.states[:, 2] - 0.3).max() == 0.0


def test_magnetic_induced_splitting_constant():
    model = MagneticModel.from_expressions(1, 1, k=[[2.0]], A_fibre=["6"])
    h = magnetic_induced_splitting(model)
    assert abs(h([0.4])[0] + 3.0) < 1e-14


def test_reduced_base_lagrangian_jets():
    model = MagneticModel.from_expressions(
        1, 1, g=[["exp(x1)"]], V="x1^3", A_base=["sin(x1)"])
    Lbar = ReducedBaseLagrangian(model)
    x, v = 0.3, 0.7
    j = Lbar.jet(np.array([x, v]))
    ex, sx, cx = np.exp(x), np.sin(x), np.cos(x)
    assert abs(j.value - (0.5 * ex * v * v - x ** 3 + sx * v)) < 1e-12
    assert abs(j.gradient[0]
               - (0.5 * ex * v * v - 3 * x * x + cx * v)) < 1e-12
    assert abs(j.gradient[1] - (ex * v + sx)) < 1e-12
    assert abs(j.hessian[0, 0]
               - (0.5 * ex * v * v - 6 * x - sx * v)) < 1e-12
    assert abs(j.hessian[0, 1] - (ex * v + cx)) < 1e-12
    assert abs(j.hessian[1, 1] - ex) < 1e-12
    with pytest.raises(DimensionMismatch):
        Lbar.jet(np.array([0.1]))


def test_decoupling_constant_interaction():
    model = MagneticModel.from_expressions(1, 1, A_fibre=["2"])
    rep = decoupling_check(model)
    assert isinstance(rep, DecouplingReport)
    assert rep.verdict
    assert rep.condition_residual == 0.0
    assert rep.subsystem_residual == 0.0
    assert rep.base_el_residual == 0.0
    assert rep.quadratic_max == 0.0


def test_decoupling_detects_position_dependent_interaction():
    model = MagneticModel.from_expressions(1, 1, A_fibre=["x1"])
    rep = decoupling_check(model)
    assert not rep.verdict
    assert abs(rep.condition_residual - 1.0) < 1e-9
    assert rep.subsystem_residual > 0.05  # w feeds back into the base block


def test_decoupling_verdict_is_only_the_linear_condition():
    # Upsilon cancels dA/dx in the linear condition, but quadratic coupling
    # remains; the verdict must not silently absorb those residuals.
    model = MagneticModel.from_expressions(
        1, 1, A_fibre=["exp(x1)"], upsilon=[[["-1"]]])
    rep = decoupling_check(model)
    assert rep.verdict
    assert rep.condition_residual == 0.0
    assert rep.subsystem_residual > 0.5
    assert rep.quadratic_max > 0.5
