import numpy as np
import pytest

from closeness import (
    CausalVerdict,
    CertificateThreshold,
    Direction,
    Outcome,
    PairWitness,
    ThresholdProvenance,
    ThresholdUndefined,
    Trajectory,
    ValidationError,
    check_assumption1,
    expansivity_certificate,
    iff_test,
)


def _thr(u, l):
    return CertificateThreshold(u_gamma_x=u, l_phi_y=l,
                                provenance=ThresholdProvenance.ANALYTIC)


def test_threshold_requires_positive_lower_constant():
    with pytest.raises(ThresholdUndefined):
        _thr(1.0, 0.0)
    with pytest.raises(ValidationError):
        _thr(0.0, 1.0)
    assert _thr(3.0, 2.0).threshold == 1.5


def test_certificate_on_a_pure_dilation(rng):
    domain = rng.normal(size=(40, 2))
    image = 2.0 * domain  # every ratio is 4
    assert expansivity_certificate((domain, image), _thr(5.0, 1.0)) is None
    witness = expansivity_certificate((domain, image), _thr(3.0, 1.0))
    assert witness is not None
    di = image[witness.i] - image[witness.j]
    dd = domain[witness.i] - domain[witness.j]
    recheck = (di @ di) / (dd @ dd)
    assert recheck == witness.ratio
    assert abs(witness.ratio - 4.0) < 1e-12


def test_certificate_threshold_monotonicity(rng):
    domain = rng.normal(size=(60, 3))
    image = np.tanh(domain) + 0.3 * domain
    i, j, best = None, None, -np.inf
    for a in range(60):
        for b in range(a + 1, 60):
            dd = domain[a] - domain[b]
            di = image[a] - image[b]
            r = (di @ di) / (dd @ dd)
            if r > best:
                best, i, j = r, a, b
    w = expansivity_certificate((domain, image), _thr(best * 0.99, 1.0))
    assert w is not None and abs(w.ratio - best) < 1e-12 * best
    assert expansivity_certificate((domain, image),
                                   _thr(best * 1.01, 1.0)) is None


def test_certificate_sampled_path_is_seeded(rng):
    domain = rng.normal(size=(2500, 2))
    image = 3.0 * domain
    w1 = expansivity_certificate((domain, image), _thr(2.0, 1.0),
                                 n_pairs=2000, seed=5)
    w2 = expansivity_certificate((domain, image), _thr(2.0, 1.0),
                                 n_pairs=2000, seed=5)
    assert (w1.i, w1.j) == (w2.i, w2.j)
    assert abs(w1.ratio - 9.0) < 1e-12


def test_certificate_input_validation(rng):
    domain = rng.normal(size=(10, 2))
    with pytest.raises(ValidationError):
        expansivity_certificate((domain, domain[:9]), _thr(1.0, 1.0))
    with pytest.raises(ValidationError):
        expansivity_certificate((domain[:1], domain[:1]), _thr(1.0, 1.0))


def _tiny_traj(x, y):
    samples = np.column_stack([np.asarray(x, float), np.asarray(y, float)])
    return Trajectory(samples=samples, dt=1.0, transient_discarded=0,
                      component_split=(1, 1))


def test_assumption1_constant_driver_gives_no_witness():
    traj = _tiny_traj([1.0, 1.0, 1.0], [0.0, 1.0, 2.0])
    assert check_assumption1(traj, 2.0) is None


def test_assumption1_constant_response_gives_infinite_ratio():
    traj = _tiny_traj([0.0, 1.0, 2.0], [1.0, 1.0, 1.0])
    w = check_assumption1(traj, 2.0)
    assert w is not None
    assert np.isinf(w.ratio)


def test_assumption1_detects_fast_driver():
    x = np.array([0.0, 10.0, -10.0, 5.0])
    y = np.array([0.0, 0.1, 0.2, 0.3])
    w = check_assumption1(_tiny_traj(x, y), 1.5)
    assert w is not None
    dx = x[w.i] - x[w.j]
    dy = y[w.i] - y[w.j]
    assert dx * dx > 0.5 * dy * dy
    assert abs(w.ratio - dx * dx / (dy * dy)) < 1e-12 * w.ratio


def test_assumption1_bound_validation():
    traj = _tiny_traj([0.0, 1.0], [0.0, 1.0])
    with pytest.raises(ValidationError):
        check_assumption1(traj, 0.5)


def test_verdict_table(rng):
    domain = rng.normal(size=(50, 2))
    image = 2.0 * domain
    tight = _thr(3.0, 1.0)   # threshold 3 < ratio 4: witness exists
    loose = _thr(5.0, 1.0)   # threshold 5 > ratio 4: no witness
    a1_witness = PairWitness(i=0, j=1, ratio=np.inf)

    v = iff_test((domain, image), tight, assumption2_declared=True,
                 assumption1_result=True)
    assert v.outcome is Outcome.RULED_OUT
    assert v.witness is not None

    v = iff_test((domain, image), loose, assumption2_declared=True,
                 assumption1_result=True)
    assert v.outcome is Outcome.ESTABLISHED

    v = iff_test((domain, image), loose, assumption2_declared=True,
                 assumption1_result=a1_witness)
    assert v.outcome is Outcome.ESTABLISHED
    assert v.assumption1_checked

    v = iff_test((domain, image), loose, assumption2_declared=False,
                 assumption1_result=True)
    assert v.outcome is Outcome.CONSISTENT_WITH_COUPLING

    v = iff_test((domain, image), loose, assumption2_declared=True,
                 assumption1_result=None)
    assert v.outcome is Outcome.CONSISTENT_WITH_COUPLING
    assert v.threshold == loose.threshold


def test_degenerate_inputs_are_inconclusive():
    pts = np.ones((30, 2))
    v = iff_test((pts, pts), _thr(1.0, 1.0), assumption2_declared=True,
                 assumption1_result=True)
    assert v.outcome is Outcome.INCONCLUSIVE
    assert v.witness is None


def test_positive_verdict_requires_both_assumptions():
    with pytest.raises(ValidationError):
        CausalVerdict(direction_tested=Direction.X_TO_Y,
                      outcome=Outcome.ESTABLISHED, witness=None,
                      assumption1_checked=True, assumption2_declared=False)


def test_verdict_serialization(rng):
    domain = rng.normal(size=(20, 2))
    v = iff_test((domain, 2.0 * domain), _thr(3.0, 1.0),
                 assumption2_declared=False, direction=Direction.Y_TO_X)
    d = v.to_json_dict()
    assert d["direction"] == "y_to_x"
    assert d["outcome"] == "ruled_out"
    assert set(d["witness"]) == {"i", "j", "ratio"}
    assert d["assumptions"] == {"assumption1_checked": False,
                                "assumption2_declared": False}
