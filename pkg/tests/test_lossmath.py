import math

import numpy as np
import pytest

from convsql.lossmath import (
    AuxHeadParams,
    ColumnVectors,
    TurnVectors,
    aux_grad_check,
    bce_with_logits,
    column_label_array,
    combined_loss,
    csp_loss,
    feature_mix,
    grad_check,
    tsp_logits,
    tsp_loss,
    tsp_loss_grads,
    turn_label_array,
)

LN2 = math.log(2.0)


def test_feature_mix_zero_prev():
    t = np.array([1.0, -2.0, 3.0])
    mixed = feature_mix(np.zeros(3), t)
    assert np.array_equal(mixed, np.concatenate([np.zeros(3), t, t, np.zeros(3)]))


def test_feature_mix_equal_vectors():
    t = np.array([0.5, 2.0])
    mixed = feature_mix(t, t)
    assert np.array_equal(mixed, np.concatenate([t, t, np.zeros(2), t * t]))


def test_feature_mix_hand_computation():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=3), rng.normal(size=3)
    mixed = feature_mix(a, b)
    for i in range(3):
        assert mixed[i] == a[i]
        assert mixed[3 + i] == b[i]
        assert mixed[6 + i] == b[i] - a[i]
        assert mixed[9 + i] == a[i] * b[i]


def test_feature_mix_dimension_mismatch():
    with pytest.raises(ValueError):
        feature_mix(np.zeros(3), np.zeros(4))


def test_zero_params_give_ln2_losses():
    rng = np.random.default_rng(1)
    d, t, m = 4, 3, 6
    params = AuxHeadParams.zeros(d)
    turns = TurnVectors(rng.normal(size=(t, d)))
    columns = ColumnVectors(rng.normal(size=(m, d)))
    assert tsp_loss(turns, np.zeros((t, 17)), params) == pytest.approx(t * 17 * LN2, abs=1e-12)
    assert csp_loss(columns, np.zeros((m, 11)), params) == pytest.approx(m * 11 * LN2, abs=1e-12)
    # labels do not matter at logit zero
    assert tsp_loss(turns, np.ones((t, 17)), params) == pytest.approx(t * 17 * LN2, abs=1e-12)


def test_saturated_logits_drive_loss_to_zero():
    d, t = 2, 1
    params = AuxHeadParams(
        tsp_weight=np.zeros((17, 4 * d)),
        tsp_bias=np.full(17, -50.0),
        csp_weight=np.zeros((11, d)),
        csp_bias=np.zeros(11),
    )
    turns = TurnVectors(np.ones((t, d)))
    loss = tsp_loss(turns, np.zeros((t, 17)), params)
    assert 0.0 <= loss < 1e-20


def test_empty_column_loss_is_zero():
    params = AuxHeadParams.zeros(3)
    columns = ColumnVectors(np.zeros((0, 3)))
    assert csp_loss(columns, np.zeros((0, 11)), params) == 0.0


def test_tsp_loss_t1_depends_only_on_t1():
    rng = np.random.default_rng(2)
    d = 4
    params = AuxHeadParams.random(d, rng)
    labels = (rng.random((1, 17)) < 0.5).astype(float)
    v = rng.normal(size=(1, d))
    base = tsp_loss(TurnVectors(v), labels, params)
    assert tsp_loss(TurnVectors(v.copy()), labels, params) == base


def test_head_count_validation():
    with pytest.raises(ValueError):
        AuxHeadParams(
            tsp_weight=np.zeros((16, 8)),
            tsp_bias=np.zeros(16),
            csp_weight=np.zeros((11, 2)),
            csp_bias=np.zeros(11),
        )
    with pytest.raises(ValueError):
        AuxHeadParams(
            tsp_weight=np.zeros((17, 9)),
            tsp_bias=np.zeros(17),
            csp_weight=np.zeros((11, 2)),
            csp_bias=np.zeros(11),
        )


def test_label_shape_validation():
    params = AuxHeadParams.zeros(2)
    with pytest.raises(ValueError):
        tsp_loss(TurnVectors(np.zeros((2, 2))), np.zeros((3, 17)), params)
    with pytest.raises(ValueError):
        csp_loss(ColumnVectors(np.zeros((2, 2))), np.zeros((2, 10)), params)


def test_bce_stable_at_extreme_logits():
    z = np.array([1000.0, -1000.0])
    y = np.array([1.0, 0.0])
    assert np.all(np.isfinite(bce_with_logits(z, y)))
    assert bce_with_logits(z, y)[0] == 0.0


def test_combined_loss_published_weights():
    breakdown = combined_loss(1.0, 2.0, 0.5, alpha=0.5, beta=8.0)
    assert breakdown.l_total == pytest.approx(6.0)


def test_combined_loss_zero_weights_identity():
    breakdown = combined_loss(3.25, 99.0, 77.0, alpha=0.0, beta=0.0)
    assert breakdown.l_total == 3.25


def test_combined_loss_affine_in_components():
    base = combined_loss(1.0, 2.0, 3.0, alpha=0.5, beta=8.0).l_total
    assert combined_loss(1.0, 4.0, 3.0, alpha=0.5, beta=8.0).l_total == pytest.approx(base + 0.5 * 2.0)
    assert combined_loss(1.0, 2.0, 4.0, alpha=0.5, beta=8.0).l_total == pytest.approx(base + 8.0)


def test_combined_loss_rejects_non_finite():
    with pytest.raises(ValueError):
        combined_loss(float("nan"), 0.0, 0.0)
    with pytest.raises(ValueError):
        combined_loss(0.0, float("inf"), 0.0)


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(3)
    worst = 0.0
    for d in (2, 4, 8):
        for _ in range(4):
            worst = max(worst, aux_grad_check(rng, d))
    assert worst < 1e-5


def test_grad_check_flags_wrong_gradient():
    rng = np.random.default_rng(4)
    d, t = 2, 2
    params = AuxHeadParams.random(d, rng)
    turns = TurnVectors(rng.normal(size=(t, d)))
    labels = (rng.random((t, 17)) < 0.5).astype(float)
    dw, db = tsp_loss_grads(turns, labels, params)

    def loss_of_bias(bias):
        p = AuxHeadParams(params.tsp_weight, bias, params.csp_weight, params.csp_bias)
        return tsp_loss(turns, labels, p)

    good = grad_check(loss_of_bias, db, params.tsp_bias)
    bad = grad_check(loss_of_bias, db + 0.5, params.tsp_bias)
    assert good < 1e-6
    assert bad > 1e-2


def test_grad_check_epsilon_validation():
    with pytest.raises(ValueError):
        grad_check(lambda x: 0.0, np.zeros(2), np.zeros(2), epsilon=0.0)


def test_label_array_helpers(retail):
    from convsql import diff_schema_usage, diff_turn, parse_sql

    a = parse_sql("SELECT sales FROM shop", retail)
    b = parse_sql("SELECT count(sales) FROM shop", retail)
    arr = turn_label_array([diff_turn(a, b)])
    assert arr.shape == (1, 17)
    assert arr.sum() == 1
    matrix = column_label_array(diff_schema_usage(a, b, retail))
    assert matrix.shape == (6, 11)
    assert matrix.sum() == 1


def test_logits_shape():
    rng = np.random.default_rng(5)
    params = AuxHeadParams.random(3, rng)
    assert tsp_logits(TurnVectors(rng.normal(size=(4, 3))), params).shape == (4, 17)
