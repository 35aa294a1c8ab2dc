import numpy as np
import pytest
from scipy.linalg import expm

from closeness import (
    DegenerateInputError,
    HypothesisViolation,
    IsometryEstimate,
    MapKind,
    MapUnderTest,
    ResonanceError,
    ValidationError,
    analytic_linear_bounds,
    build_maps,
    chain_ratios,
    default_initial_condition,
    delay_embed,
    distance_ratio_sweep,
    empirical_isometry,
    example1_system,
    phi_matrix,
    ratios_on_pairs,
    resonance_factor,
    sample_pair_indices,
    simulate_linear,
    subseed,
    x_subsystem,
)
from closeness.linear import EXAMPLE_THETA_1, EXAMPLE_THETA_2


# --- empirical ratio profiles ------------------------------------------------


def test_identity_map_has_unit_profile(rng):
    pts = rng.normal(size=(300, 3))
    mut = MapUnderTest(MapKind.PsiYtoX, pts, pts)
    est = empirical_isometry(mut, n_pairs=500, seed=0)
    assert est.lower == 1.0
    assert est.upper == 1.0
    assert est.percentiles[50] == 1.0


def test_doubling_map_profile_is_four(rng):
    pts = rng.normal(size=(300, 3))
    mut = MapUnderTest(MapKind.PsiYtoX, pts, 2.0 * pts)
    est = empirical_isometry(mut, n_pairs=500, seed=0)
    assert est.lower == 4.0
    assert est.upper == 4.0


def test_map_under_test_requires_paired_counts(rng):
    with pytest.raises(ValidationError):
        MapUnderTest(MapKind.PiX, rng.normal(size=(10, 2)),
                     rng.normal(size=(9, 2)))


def test_estimate_rejects_unordered_profile():
    with pytest.raises(ValidationError):
        IsometryEstimate(lower=2.0, upper=3.0,
                         percentiles={5: 1.0, 50: 2.5, 95: 2.8},
                         n_pairs=10, rng_seed=0)


def test_sample_pair_indices_properties(rng):
    pts = rng.normal(size=(50, 2))
    pts[1] = pts[0]  # a coincident pair that must never be drawn
    ii, jj = sample_pair_indices([pts], 50, 400, seed=3)
    assert ii.shape == (400,)
    assert np.all(ii != jj)
    assert np.all((ii >= 0) & (ii < 50) & (jj >= 0) & (jj < 50))
    assert not np.any((np.minimum(ii, jj) == 0) & (np.maximum(ii, jj) == 1))


def test_sample_pair_indices_degenerate_inputs():
    pts = np.ones((20, 3))
    with pytest.raises(DegenerateInputError):
        sample_pair_indices([pts], 20, 10, seed=0)


def test_ratios_on_pairs_rejects_coincident_domains():
    pts = np.ones((4, 2))
    mut = MapUnderTest(MapKind.PiX, pts, pts)
    with pytest.raises(ValidationError):
        ratios_on_pairs(mut, np.array([0, 1]), np.array([1, 2]))


def test_empirical_isometry_is_seeded(rng):
    pts = rng.normal(size=(100, 2))
    mut = MapUnderTest(MapKind.PiX, pts, pts ** 2)
    a = empirical_isometry(mut, n_pairs=300, seed=7)
    b = empirical_isometry(mut, n_pairs=300, seed=7)
    c = empirical_isometry(mut, n_pairs=300, seed=8)
    assert a == b
    assert a != c


# --- resonance factor and analytic bounds ------------------------------------


def test_resonance_factor_single_frequency():
    nu = resonance_factor([EXAMPLE_THETA_1], 1.0)
    assert abs(nu - 1.356762920646095) < 1e-12


def test_resonance_factor_frequency_pair():
    nu = resonance_factor([EXAMPLE_THETA_1, EXAMPLE_THETA_2], 1.0)
    assert abs(nu - 5.695246311368399) < 1e-12


def test_resonance_factor_singular_cases():
    with pytest.raises(ResonanceError):
        resonance_factor([np.pi], 1.0)
    with pytest.raises(ResonanceError):
        resonance_factor([1.0, 1.0 + 2.0 * np.pi], 1.0)


def test_driver_embedding_band_is_tight():
    sys_, meas = example1_system(0, m=250)
    sub = x_subsystem(sys_)
    b = analytic_linear_bounds(sub, meas.x_block, 250, 1.0)
    assert abs(b.scale - 1.0) < 1e-12
    assert b.delta0 == 0.0
    assert abs(b.delta1_of_m - 0.00542705168258438) < 1e-12
    assert abs(b.lower - 0.9945729483174156) < 1e-12
    assert abs(b.upper - 1.0054270516825844) < 1e-12
    assert b.hypothesis_a_holds
    with pytest.warns(UserWarning):  # same h reused at twice the length
        b500 = analytic_linear_bounds(sub, meas.x_block, 500, 1.0)
    assert abs(b500.delta1_of_m / b.delta1_of_m - 0.5) < 1e-12


def test_driver_band_constants_are_measurement_invariant():
    # any real functional aligns identically with a planar mode, so the
    # band cannot depend on the measurement draw
    deltas = set()
    for seed in (1, 2, 3):
        sys_, meas = example1_system(seed, m=250)
        b = analytic_linear_bounds(x_subsystem(sys_), meas.x_block, 250, 1.0)
        deltas.add(round(b.delta1_of_m, 15))
        assert abs(b.scale - 1.0) < 1e-12
    assert len(deltas) == 1


def test_response_embedding_band_constants():
    sys_, meas = example1_system(5, m=250)
    b = analytic_linear_bounds(sys_, meas.joint_y, 250, 1.0)
    assert abs(b.scale - 3.7071067811865475) < 1e-9
    assert abs(b.delta0 - 0.8419828528814566) < 1e-9
    assert abs(b.lower - 0.119111545) < 1e-7
    assert abs(b.m_min - 199.16596849974167) < 1e-3
    assert b.hypothesis_a_holds
    with pytest.warns(UserWarning):  # same h reused at a shorter length
        b150 = analytic_linear_bounds(sys_, meas.joint_y, 150, 1.0)
    assert not b150.hypothesis_a_holds


def test_driver_functional_on_coupled_system_violates_alignment():
    sys_, meas = example1_system(5, m=250)
    with pytest.raises(HypothesisViolation) as err:
        analytic_linear_bounds(sys_, meas.joint_x, 250, 1.0)
    assert err.value.condition == "c"


def test_misnormalized_h_is_rescaled_with_warning():
    sys_, meas = example1_system(5, m=250)
    with pytest.warns(UserWarning):
        scaled = analytic_linear_bounds(sys_, 2.0 * meas.joint_y, 250, 1.0)
    plain = analytic_linear_bounds(sys_, meas.joint_y, 250, 1.0)
    assert abs(scaled.scale - plain.scale) < 1e-12
    assert abs(scaled.delta0 - plain.delta0) < 1e-12


def test_empirical_driver_ratios_stay_inside_analytic_band():
    sys_, meas = example1_system(0, m=250)
    traj = simulate_linear(sys_, default_initial_condition(sys_), 1.0, 1500)
    series = traj.x @ meas.x_block
    emb = delay_embed(series, 250, 1)
    domain = traj.x[emb.base_offset:]
    mut = MapUnderTest(MapKind.PhiGammaX, domain, emb.points)
    est = empirical_isometry(mut, n_pairs=2000, seed=1)
    b = analytic_linear_bounds(x_subsystem(sys_), meas.x_block, 250, 1.0)
    assert est.lower >= b.lower - 1e-9
    assert est.upper <= b.upper + 1e-9


# --- embedding operator matrix ------------------------------------------------


def test_phi_matrix_single_row():
    sys_, meas = example1_system(0)
    rows, s, rank = phi_matrix(sys_, meas.joint_y, 1, 1.0)
    assert rows.shape == (1, 4)
    assert np.array_equal(rows[0], np.asarray(meas.joint_y, dtype=float))
    assert rank == 1


def test_phi_matrix_matches_matrix_exponential():
    sys_, meas = example1_system(7)
    rows, _, _ = phi_matrix(sys_, meas.joint_y, 5, 0.7)
    for k in range(5):
        expected = meas.joint_y @ expm(-sys_.A * 0.7 * k)
        assert np.allclose(rows[k], expected, atol=1e-9)


def test_phi_matrix_decoupled_keeps_driver_columns_exactly_zero():
    sys_, meas = example1_system(0, coupled=False)
    rows, _, rank = phi_matrix(sys_, meas.joint_y, 6, 1.0)
    assert np.all(rows[:, :2] == 0.0)
    assert rank <= 2


def test_phi_matrix_coupled_is_full_rank():
    sys_, meas = example1_system(0, coupled=True)
    _, _, rank = phi_matrix(sys_, meas.joint_y, 6, 1.0)
    assert rank == 4


def test_phi_matrix_agrees_with_delay_embedding():
    sys_, meas = example1_system(3)
    traj = simulate_linear(sys_, default_initial_condition(sys_), 1.0, 60)
    series = traj.samples @ meas.joint_y
    emb = delay_embed(series, 4, 1)
    rows, _, _ = phi_matrix(sys_, meas.joint_y, 4, 1.0)
    states = traj.samples[emb.base_offset:]
    assert np.allclose(emb.points, states @ rows.T, atol=1e-8)


# --- named maps and the factor chain -----------------------------------------


@pytest.fixture(scope="module")
def henon_maps(henon_coupled, henon_embeddings):
    emb_x, emb_y = henon_embeddings
    return build_maps(henon_coupled, emb_x, emb_y)


def test_projections_never_expand(henon_maps):
    for kind in (MapKind.PiX, MapKind.PiY):
        est = empirical_isometry(henon_maps[kind], n_pairs=2000, seed=11)
        assert est.upper <= 1.0 + 1e-12


def test_inclusions_never_contract(henon_maps):
    for kind in (MapKind.IotaX, MapKind.IotaY):
        est = empirical_isometry(henon_maps[kind], n_pairs=2000, seed=11)
        assert est.lower >= 1.0 - 1e-12


def test_inclusion_image_splits_into_blocks(henon_maps, henon_coupled):
    mut = henon_maps[MapKind.IotaX]
    ii, jj = sample_pair_indices([mut.domain_points], mut.n_points, 500,
                                 seed=2)
    joint = mut.image_points
    dx = joint[ii, :2] - joint[jj, :2]
    dy = joint[ii, 2:] - joint[jj, 2:]
    total = np.einsum("ij,ij->i", joint[ii] - joint[jj], joint[ii] - joint[jj])
    split = np.einsum("ij,ij->i", dx, dx) + np.einsum("ij,ij->i", dy, dy)
    assert np.allclose(total, split, rtol=1e-12, atol=0)


def test_factor_chain_identity(henon_maps):
    ratios = chain_ratios(henon_maps, 1000, seed=4)
    lhs = ratios[MapKind.PsiYtoX]
    rhs = (ratios[MapKind.PhiGammaX] * ratios[MapKind.PiX]
           / ratios[MapKind.PhiPhiY])
    assert np.allclose(lhs, rhs, rtol=1e-9)
    assert lhs.max() <= (ratios[MapKind.PhiGammaX].max()
                         * ratios[MapKind.PiX].max()
                         / ratios[MapKind.PhiPhiY].min()) * (1 + 1e-9)


def test_build_maps_cannot_make_joint_functional_embedding(
        henon_coupled, henon_embeddings):
    emb_x, emb_y = henon_embeddings
    with pytest.raises(ValidationError):
        build_maps(henon_coupled, emb_x, emb_y,
                   kinds=[MapKind.PhiPhiXY])


def test_sweep_cell_matches_direct_estimate(henon_coupled, henon_embeddings):
    emb_x, emb_y = henon_embeddings

    def simulate_fn(coupling):
        return henon_coupled, emb_x, emb_y

    records = distance_ratio_sweep(simulate_fn, [0.4], [MapKind.PhiGammaX],
                                   n_pairs=300, seed=5)
    maps = build_maps(henon_coupled, emb_x, emb_y,
                      kinds=[MapKind.PhiGammaX])
    direct = empirical_isometry(maps[MapKind.PhiGammaX], n_pairs=300,
                                seed=subseed(5, 0, 0))
    assert len(records) == 1
    rec = records[0]
    assert rec["map"] == "phi_gamma_x"
    assert rec["lower"] == direct.lower
    assert rec["p50"] == direct.percentiles[50]
    assert rec["upper"] == direct.upper


def test_subseed_streams_are_distinct():
    a = np.random.default_rng(subseed(1, 2, 3)).random(4)
    b = np.random.default_rng(subseed(1, 2, 3)).random(4)
    c = np.random.default_rng(subseed(1, 3, 2)).random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
