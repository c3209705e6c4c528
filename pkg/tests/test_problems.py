"""
问题定义与注册表测试
"""
import math

import numpy as np
import pytest
from pydantic import ValidationError

from saturn_mousehunter_obstacle_engine.domain.errors import InvalidParameterError
from saturn_mousehunter_obstacle_engine.domain.models import ControlFamily, ProblemSpec
from saturn_mousehunter_obstacle_engine.domain.problems import REDUCED_OF, build, default_parameters, problem_ids


class TestRegistry:
    """字符串ID注册表"""

    def test_problem_ids_sorted(self):
        assert problem_ids() == ["geometric_put_1d", "geometric_put_3d", "indifference_1+1d", "indifference_2+1d"]

    def test_reduced_pairs_are_registered(self):
        for full, reduced in REDUCED_OF.items():
            assert full in problem_ids()
            assert reduced in problem_ids()

    def test_unknown_problem(self):
        with pytest.raises(InvalidParameterError):
            build("heston_call")

    def test_unknown_parameter(self):
        with pytest.raises(InvalidParameterError, match="volatility"):
            build("geometric_put_3d", volatility=0.2)

    def test_default_parameters_use_lists(self):
        defaults = default_parameters("geometric_put_3d")
        assert defaults["sigmas"] == [0.1, 0.1, 0.1]
        assert defaults["strike"] == 8.0
        assert defaults["sigma0_sq"] == 1.0

    def test_list_overrides_are_accepted(self):
        spec = build("geometric_put_3d", sigmas=[0.2, 0.2, 0.2])
        assert spec.parameters["sigmas"] == [0.2, 0.2, 0.2]

    def test_sigma_floor_override(self):
        assert build("geometric_put_1d").sigma_floor == 1e-12
        assert build("geometric_put_1d", sigma_floor=1e-6).sigma_floor == 1e-6
        with pytest.raises(InvalidParameterError):
            build("geometric_put_1d", sigma_floor=0.0)


class TestObstacleRegularity:
    """lip_x / holder_t 在包围盒上确实是 g 的界"""

    @pytest.fixture(params=["geometric_put_3d", "geometric_put_1d", "indifference_2+1d", "indifference_1+1d"])
    def spec(self, request):
        return build(request.param)

    def _pairs(self, spec, rng, count=5000):
        lo, hi = spec.box
        return rng.uniform(lo, hi, size=(count, spec.dim)), rng.uniform(lo, hi, size=(count, spec.dim))

    def test_lipschitz_in_space(self, spec):
        rng = np.random.default_rng(11)
        x, y = self._pairs(spec, rng)
        for t in (0.0, 0.5 * spec.horizon, spec.horizon):
            gap = np.abs(spec.obstacle(t, x) - spec.obstacle(t, y))
            assert np.all(gap <= spec.lip_x * np.linalg.norm(x - y, axis=-1) * (1.0 + 1e-9) + 1e-15)

    def test_half_holder_in_time(self, spec):
        rng = np.random.default_rng(12)
        x, _ = self._pairs(spec, rng, 2000)
        t = rng.uniform(0.0, spec.horizon, size=(2, 2000))
        gap = np.abs(spec.obstacle(t[0], x) - spec.obstacle(t[1], x))
        assert np.all(gap <= spec.holder_t * np.sqrt(np.abs(t[0] - t[1])) * (1.0 + 1e-9) + 1e-15)


class TestGeometricPut:
    """几何篮子看跌"""

    def test_full_problem_shape(self, put_3d):
        assert put_3d.dim == 3
        assert put_3d.horizon == 1.0
        assert put_3d.eval_point == (2.0, 2.0, 2.0)
        assert put_3d.obstacle_bound == 8.0
        assert float(put_3d.obstacle(0.0, put_3d.x0)) == 0.0

    def test_reduced_problem_collapses_basket(self, put_1d):
        assert put_1d.dim == 1
        assert put_1d.eval_point == (8.0,)
        sigma = put_1d.diffusion(0.0, np.array([8.0]))
        assert sigma.shape == (1, 1)
        assert sigma[0, 0] == pytest.approx(math.sqrt(0.03) * 8.0)
        assert put_1d.drift(0.0, np.array([8.0]))[0] == pytest.approx(0.09 * 8.0)

    def test_obstacle_is_put_payoff(self, put_3d):
        x = np.array([[1.0, 1.0, 1.0], [2.0, 2.0, 3.0]])
        np.testing.assert_allclose(put_3d.obstacle(0.5, x), [7.0, 0.0])

    def test_nonlinearity_value(self):
        spec = build("geometric_put_3d", sigma0_sq=0.9)
        x = np.array([2.0, 2.0, 2.0])
        out = spec.nonlinearity(0.0, x, 1.0, np.zeros(3), np.eye(3))
        # ½(1 − 0.9)·Σ x²σ² − r
        assert float(out) == pytest.approx(0.05 * 0.12 - 0.03)

    def test_split_reassembles_black_scholes_generator(self):
        spec = build("geometric_put_3d", sigma0_sq=0.7)
        rng = np.random.default_rng(3)
        x = rng.uniform(1.0, 3.0, (16, 3))
        v = rng.normal(size=16)
        p = rng.normal(size=(16, 3))
        raw = rng.normal(size=(16, 3, 3))
        gamma = 0.5 * (raw + np.swapaxes(raw, -1, -2))

        a = spec.covariance(0.0, x)
        lhs = 0.5 * np.einsum("nij,nij->n", a, gamma) + np.sum(spec.drift(0.0, x) * p, axis=-1)
        lhs = lhs + spec.nonlinearity(0.0, x, v, p, gamma)
        diag = np.diagonal(gamma, axis1=-2, axis2=-1)
        expected = 0.5 * np.sum(x * x * 0.01 * diag, axis=-1) + 0.03 * np.sum(x * p, axis=-1) - 0.03 * v
        np.testing.assert_allclose(lhs, expected, rtol=1e-12, atol=1e-12)

    def test_drift_moved_into_nonlinearity(self):
        spec = build("geometric_put_1d", drift_in_linear_part=False)
        x = np.array([8.0])
        assert spec.drift(0.0, x)[0] == 0.0
        out = spec.nonlinearity(0.0, x, 0.0, np.array([1.0]), np.zeros((1, 1)))
        assert float(out) == pytest.approx(0.09 * 8.0)

    def test_vectorised_shapes(self, put_3d):
        x = np.full((5, 4, 3), 2.0)
        assert put_3d.drift(0.0, x).shape == (5, 4, 3)
        assert put_3d.diffusion(0.0, x).shape == (5, 4, 3, 3)
        assert put_3d.obstacle(0.0, x).shape == (5, 4)
        out = put_3d.nonlinearity(0.0, x, np.zeros((5, 4)), np.zeros((5, 4, 3)), np.zeros((5, 4, 3, 3)))
        assert out.shape == (5, 4)

    @pytest.mark.parametrize("overrides", [
        {"sigma0_sq": 0.0},
        {"sigma0_sq": 1.5},
        {"r": 0.0},
        {"strike": -1.0},
        {"sigmas": [0.1, -0.1, 0.1]},
        {"spots": [2.0, 2.0]},
    ])
    def test_invalid_parameters(self, overrides):
        with pytest.raises(InvalidParameterError):
            build("geometric_put_3d", **overrides)

    def test_european_flag(self):
        assert build("geometric_put_1d", american=False).early_exercise is False


class TestIndifference:
    """指数效用无差别定价"""

    def test_state_layout(self, indifference):
        assert indifference.dim == 3
        assert indifference.eval_point == (1.0, 1.0, 1.0)
        assert indifference.concave_axes == (0,)
        assert indifference.control_family.sense == "sup"

    def test_obstacle_at_origin(self, indifference):
        # Merton因子 exp(−μ0²T/(2σ0²)) = e^{−0.5}，x = 1，行权收益 0
        assert float(indifference.obstacle(0.0, indifference.x0)) == pytest.approx(-math.exp(-1.5))

    def test_nonlinearity_value(self, indifference):
        x = np.array([1.0, 1.0, 1.0])
        gamma = np.zeros((3, 3))
        gamma[0, 0] = -1.0
        out = indifference.nonlinearity(0.0, x, 0.0, np.array([1.0, 0.0, 0.0]), gamma)
        # −(0.1)²/(2·0.01·(−1)) − ½·0.05²·(−1)
        assert float(out) == pytest.approx(0.5 + 0.00125)

    def test_nonlinearity_singular_at_flat_wealth(self, indifference):
        out = indifference.nonlinearity(0.0, np.ones(3), 0.0, np.zeros(3), np.zeros((3, 3)))
        assert not np.isfinite(out)

    def test_diffusion_is_diagonal(self, indifference):
        sigma = indifference.diffusion(0.0, np.array([1.0, 2.0, 3.0]))
        np.testing.assert_allclose(sigma, np.diag([0.05, 0.2, 0.3]))

    def test_reduced_problem(self, indifference_reduced):
        assert indifference_reduced.dim == 2
        assert indifference_reduced.eval_point == (1.0, 1.0)
        drift = indifference_reduced.drift(0.0, np.array([1.0, 2.0]))
        np.testing.assert_allclose(drift, [0.0, 0.4])
        sigma = indifference_reduced.diffusion(0.0, np.array([1.0, 2.0]))
        assert sigma[1, 1] == pytest.approx(math.sqrt(0.02) * 2.0)

    def test_mismatched_assets(self):
        with pytest.raises(InvalidParameterError):
            build("indifference_2+1d", mus=[0.1])

    def test_non_positive_eps(self):
        with pytest.raises(InvalidParameterError):
            build("indifference_2+1d", eps=0.0)

    def test_value_is_non_positive_and_wealth_unsplit(self, indifference):
        assert indifference.value_range == (-math.inf, 0.0)
        assert indifference.smooth_axes == (0,)

    def test_curvature_floor_bounds_implied_control(self, indifference):
        # 投资量上限为 3 倍Merton比例 μ0/(σ0²γ) = 10
        x = np.ones((1, 3))
        p = np.array([[0.2, 0.0, 0.0]])
        gamma = np.zeros((1, 3, 3))
        floor = indifference.curvature_floor(0.0, x, np.zeros(1), p, gamma)
        assert float(floor[0]) == pytest.approx(0.02 / (0.01 * 30.0))


class TestProblemSpec:
    """ProblemSpec 校验"""

    def _kwargs(self, **overrides):
        kwargs = dict(
            problem_id="toy",
            dim=1,
            horizon=1.0,
            drift=lambda t, x: np.zeros_like(x),
            diffusion=lambda t, x: np.ones(np.shape(x) + (1,)),
            nonlinearity=lambda t, x, r, p, g: np.zeros(np.shape(r)),
            obstacle=lambda t, x: np.zeros(np.shape(x)[:-1]),
            eval_point=(0.0,),
            domain_box=((-1.0,), (1.0,)),
            obstacle_bound=1.0,
        )
        kwargs.update(overrides)
        return kwargs

    def test_valid_spec(self):
        spec = ProblemSpec(**self._kwargs())
        assert spec.x0.shape == (1,)
        assert spec.early_exercise is True

    def test_eval_point_dimension(self):
        with pytest.raises(ValidationError):
            ProblemSpec(**self._kwargs(eval_point=(0.0, 1.0)))

    def test_degenerate_box(self):
        with pytest.raises(ValidationError):
            ProblemSpec(**self._kwargs(domain_box=((1.0,), (1.0,))))

    def test_concave_axis_out_of_range(self):
        with pytest.raises(ValidationError):
            ProblemSpec(**self._kwargs(concave_axes=(1,)))

    def test_smooth_axis_out_of_range(self):
        with pytest.raises(ValidationError):
            ProblemSpec(**self._kwargs(smooth_axes=(2,)))

    def test_empty_value_range(self):
        with pytest.raises(ValidationError):
            ProblemSpec(**self._kwargs(value_range=(0.0, 0.0)))
        assert ProblemSpec(**self._kwargs()).value_range == (-math.inf, math.inf)

    def test_control_family_extremum(self):
        family = ControlFamily(
            operator=lambda a, t, x, r, p, g: a * np.asarray(r)[..., None],
            grid=lambda k: np.linspace(-1.0, 1.0, k),
            resolution=3,
            sense="inf",
        )
        np.testing.assert_allclose(family.extremum(0.0, None, np.array([2.0, -3.0]), None, None), [-2.0, -3.0])
