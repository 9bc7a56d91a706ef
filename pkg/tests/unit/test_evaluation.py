from math import exp, lgamma, log

from granulum import UndefinedCorrelationError, ValidationError
from granulum.configure import GenConfig, load_config, presets_directory
from granulum.core import (
    GranularityLevelMatrix,
    ItemCatalog,
    ResponseMatrix,
    ScoreVector,
    UserRegistry,
    build_response_matrix,
)
from granulum.evaluation import (
    GofResult,
    GradedIrtModel,
    IrtShareModel,
    NaiveGradedModel,
    NaiveShareModel,
    ShareModel,
    accepted_counts,
    chi_square_statistic,
    correlation_matrix,
    damping_sweep,
    goodness_of_fit,
    goodness_of_fit_graded,
    partition_by_attitude,
    pearson,
    sensitivity_comparison,
    spearman,
)
from granulum.granularity import build_level_matrix
from granulum.graph import pagerank
from granulum.irt import AbilityVector, ItemParams, fit_2pl, fit_grm, score_psgi, score_psi
from granulum.naive import score_psgn, score_psn
from granulum.synthetic import generate_dataset
import numpy as np
import pytest
from scipy import stats


def lower_gamma_series(a, x, terms=500):
    """Regularized ``P(a, x)`` by its power series."""
    if x == 0:
        return 0.0
    term = total = 1.0 / a
    for n in range(1, terms):
        term *= x / (a + n)
        total += term
        if term < total * 1e-17:
            break
    return total * exp(-x + a * log(x) - lgamma(a))


def upper_gamma_fraction(a, x, iterations=500):
    """Regularized ``Q(a, x)`` by Lentz's continued fraction."""
    tiny = 1e-300
    b = x + 1 - a
    c = 1 / tiny
    d = 1 / b
    h = d
    for i in range(1, iterations):
        an = -i * (i - a)
        b += 2
        d = an * d + b
        d = tiny if abs(d) < tiny else d
        c = b + an / c
        c = tiny if abs(c) < tiny else c
        d = 1 / d
        delta = d * c
        h *= delta
        if abs(delta - 1) < 1e-16:
            break
    return exp(-x + a * log(x) - lgamma(a)) * h


def users(N):
    return UserRegistry([f"u{j:03d}" for j in range(N)])


def smoke_config(seed, **changes):
    settings = dict(seed=seed, n_users=600, n_items=6, coupling=1.0)
    settings.update(changes)
    config = GenConfig(**settings)
    config.graph.edges_per_node = 3
    return config


def test_partition_sizes():
    partition = partition_by_attitude(np.arange(10), 3)
    assert partition.sizes.tolist() == [4, 3, 3]
    assert partition.assignments.tolist() == [1, 1, 1, 1, 2, 2, 2, 3, 3, 3]
    assert partition_by_attitude(np.arange(7), 3).sizes.tolist() == [3, 2, 2]
    with pytest.raises(ValueError):
        partition_by_attitude(np.arange(3), 4)
    with pytest.raises(ValueError):
        partition_by_attitude(np.arange(3), 1)


def test_partition_orders_by_attitude_and_breaks_ties_by_index():
    partition = partition_by_attitude([3.0, 1.0, 1.0, 2.0], 2)
    assert partition.assignments.tolist() == [2, 1, 1, 2]
    tied = partition_by_attitude(np.zeros(6), 3)
    assert tied.assignments.tolist() == [1, 1, 2, 2, 3, 3]


def test_partition_keeps_registry():
    vector = ScoreVector(users(4), "PSN", [0.4, 0.1, 0.3, 0.2])
    partition = partition_by_attitude(vector, 2)
    assert partition.registry == vector.registry
    assert partition.members(1).tolist() == [1, 3]


def test_chi_square_hand_value():
    statistic, clamped = chi_square_statistic([10, 10, 10], [0.2, 0.5, 0.8], [0.3, 0.5, 0.7])
    assert clamped == 0
    assert np.isclose(statistic, 20 / 21, rtol=1e-12)
    zero, _ = chi_square_statistic([5, 5], [0.4, 0.6], [0.4, 0.6])
    assert zero == 0.0


def test_chi_square_clamps_empty_expectations():
    statistic, clamped = chi_square_statistic([4, 4], [0.0, 0.5], [0.0, 0.5])
    assert clamped == 1
    assert statistic == 0.0


def test_chi_square_survival_matches_incomplete_gamma():
    for df in range(1, 21):
        for x in (0.1, 0.5, 1.0, 2.5, 5.0, 10.0, 17.3, 30.0, 55.0):
            a, half = df / 2, x / 2
            survival = stats.chi2.sf(x, df)
            assert abs(survival - (1 - lower_gamma_series(a, half))) <= 1e-8
            if half > a + 1:
                assert abs(survival - upper_gamma_fraction(a, half)) <= 1e-8


def test_goodness_of_fit_degrees_of_freedom():
    rng = np.random.default_rng(1)
    cells = (rng.random((3, 120)) < 0.5).astype(int)
    r = ResponseMatrix(ItemCatalog(["a", "b", "c"]), users(120), cells)
    partition = partition_by_attitude(r.column_counts(), 4, r.registry)
    results = goodness_of_fit(r, NaiveShareModel(r), partition)
    assert [result.degrees_of_freedom for result in results] == [3, 3, 3]
    assert [result.item_id for result in results] == ["a", "b", "c"]
    fit = fit_2pl(r)
    irt = goodness_of_fit(r, IrtShareModel(fit.params, fit.abilities), partition)
    assert all(result.degrees_of_freedom == 2 for result in irt)
    with pytest.raises(ValueError):
        goodness_of_fit(
            r, IrtShareModel(fit.params, fit.abilities), partition_by_attitude(r.column_counts(), 2)
        )


def test_goodness_of_fit_accepts_exact_fit():
    # every group of 4 users shares item "a" exactly half of the time
    cells = np.array([[1, 0, 1, 0] * 3, [1, 1, 1, 0] * 3])
    r = ResponseMatrix(ItemCatalog(["a", "b"]), users(12), cells)
    partition = partition_by_attitude(np.repeat([0, 1, 2], 4), 3, r.registry)
    results = goodness_of_fit(r, NaiveShareModel(r), partition)
    assert results[0].chi_square == 0.0
    assert results[0].p_value == 1.0 and results[0].accepted


class CoinModel(ShareModel):
    label = "COIN"
    estimated_params = 0

    def expected(self, partition, level=1):
        return np.full((self.catalog.n, partition.K), 0.5)


def test_share_model_tests_every_catalog_item():
    cells = np.array([[1, 0, 1, 0] * 3, [1, 1, 1, 0] * 3])
    r = ResponseMatrix(ItemCatalog(["a", "b"]), users(12), cells)
    model = CoinModel(r.catalog)
    assert model.catalog is r.catalog
    assert model.items().tolist() == [0, 1]
    partition = partition_by_attitude(np.repeat([0, 1, 2], 4), 3, r.registry)
    results = goodness_of_fit(r, model, partition)
    assert [result.item_id for result in results] == ["a", "b"]
    assert results[0].chi_square == 0.0 and results[0].degrees_of_freedom == 3
    assert results[1].chi_square > 0


def test_goodness_of_fit_rejects_user_mismatch():
    r = ResponseMatrix(ItemCatalog(["a"]), users(6), np.array([[1, 0, 1, 0, 1, 1]]))
    partition = partition_by_attitude(np.arange(5), 2)
    with pytest.raises(ValidationError):
        goodness_of_fit(r, NaiveShareModel(r), partition)


def test_graded_goodness_of_fit():
    rng = np.random.default_rng(4)
    cells = rng.integers(0, 4, size=(3, 200))
    glm = GranularityLevelMatrix(ItemCatalog(["a", "b", "c"]), users(200), cells, levels=3)
    partition = partition_by_attitude(cells.sum(axis=0), 4, glm.registry)
    naive = goodness_of_fit_graded(glm, NaiveGradedModel(glm), partition, k=2)
    assert all(result.level == 2 and result.model == "PSGN" for result in naive)
    fit = fit_grm(glm)
    irt = goodness_of_fit_graded(glm, GradedIrtModel(fit.params, fit.abilities), partition, k=3)
    assert all(0 <= result.p_value <= 1 for result in irt)
    with pytest.raises(ValueError):
        goodness_of_fit_graded(glm, NaiveGradedModel(glm), partition, k=4)


def test_accepted_counts():
    results = [
        GofResult(0, "a", "PSN", 4, 1.0, 3, 0.8, True),
        GofResult(1, "b", "PSN", 4, 9.0, 3, 0.02, False),
        GofResult(0, "a", "PSI", 4, 1.0, 2, 0.6, True),
        GofResult(0, "a", "PSGN", 4, 1.0, 3, 0.6, True, level=2),
    ]
    counts = accepted_counts(results).set_index(["K", "model", "level"])
    assert counts.loc[(4, "PSN", 0), "accepted"] == 1
    assert counts.loc[(4, "PSN", 0), "tested"] == 2
    assert counts.loc[(4, "PSGN", 2), "accepted"] == 1


def test_pearson_examples():
    registry = users(5)
    x = ScoreVector(registry, "PSN", [1, 2, 3, 4, 5])
    y = ScoreVector(registry, "PSI", [2, 1, 4, 3, 5])
    assert np.isclose(pearson(x, y), 0.8)
    assert np.isclose(pearson(x, x), 1.0)
    scaled = ScoreVector(registry, "PSI", 3 * np.asarray([2, 1, 4, 3, 5]) + 7)
    assert np.isclose(pearson(x, scaled), pearson(x, y))
    assert np.isclose(pearson(x, y), pearson(y, x))
    assert np.isclose(spearman(x, y), 0.8)
    constant = ScoreVector(registry, "PSNA", np.full(5, 2.0))
    with pytest.raises(UndefinedCorrelationError):
        pearson(x, constant)
    with pytest.raises(ValidationError):
        pearson(x, ScoreVector(users(4), "PSI", [1, 2, 3, 4]))


def test_correlation_matrix():
    registry = users(5)
    x = ScoreVector(registry, "PSN", [1, 2, 3, 4, 5])
    y = ScoreVector(registry, "PSI", [2, 1, 4, 3, 5])
    constant = ScoreVector(registry, "PSC-PRC", np.full(5, 0.2))
    matrix = correlation_matrix([x, y, constant])
    assert list(matrix.columns) == ["PSN", "PSI", "PSC-PRC"]
    assert matrix.loc["PSN", "PSN"] == 1.0
    assert np.isclose(matrix.loc["PSI", "PSN"], 0.8)
    assert np.isnan(matrix.loc["PSC-PRC"]).all()
    assert correlation_matrix([x]).values.tolist() == [[1.0]]
    with pytest.raises(ValueError):
        correlation_matrix([x, y], method="kendall")


def test_sensitivity_comparison():
    dataset = generate_dataset(smoke_config(seed=3))
    r = build_response_matrix(dataset.granularity)
    glm = build_level_matrix(dataset.granularity)
    fit = fit_2pl(r)
    graded = fit_grm(glm)
    items, levels, agreement = sensitivity_comparison(r, fit.params, glm, graded.params)
    assert list(items.columns) == ["item_id", "naive", "irt", "discrimination"]
    assert len(levels) == 3 * r.n
    assert agreement > 0.5
    only_items = sensitivity_comparison(r, fit.params)
    assert only_items[1] is None


def test_damping_sweep_with_coupling():
    dataset = generate_dataset(smoke_config(seed=5, n_users=1000))
    r = build_response_matrix(dataset.granularity)
    sweep = damping_sweep(dataset.graph, [score_psn(r)], [0.05, 0.45, 0.95])
    assert list(sweep["damping"]) == [0.05, 0.45, 0.95]
    assert (sweep["pearson"] > 0).all()
    assert np.isclose(
        sweep["pearson"].iloc[2], pearson(score_psn(r), pagerank(dataset.graph, 0.95))
    )


def test_positive_sensitivities_make_psi_increase_with_attitude():
    registry = users(5)
    params = ItemParams(
        ItemCatalog(["a", "b", "c"]),
        discrimination=np.array([0.7, 1.5, 2.0]),
        sensitivity=np.array([0.2, 1.0, 2.5]),
        fitted=np.ones(3, dtype=bool),
    )
    theta = np.array([-2.0, -0.5, 0.0, 1.0, 3.0])
    psi = score_psi(params, AbilityVector(registry, theta)).values
    assert np.all(np.diff(psi) > 0)


def test_naive_and_irt_sensitivities_rank_items_differently():
    # a weakly discriminating rare item and a steep, more often hidden item
    # swap places between the two rankings
    rng = np.random.default_rng(21)
    theta = rng.standard_normal(3000)
    discrimination = np.array([0.4, 3.0, 1.0, 1.0])
    sensitivity = np.array([1.5, 0.6, -1.0, 0.0])
    probability = 1 / (1 + np.exp(-discrimination[:, None] * (theta - sensitivity[:, None])))
    cells = (rng.random(probability.shape) < probability).astype(int)
    r = ResponseMatrix(ItemCatalog(["a", "b", "c", "d"]), users(3000), cells)
    fit = fit_2pl(r)
    items, levels, agreement = sensitivity_comparison(r, fit.params)
    assert levels is None
    assert items.set_index("item_id")["naive"].idxmax() == "b"
    assert items.set_index("item_id")["irt"].idxmax() == "a"
    assert 0 < agreement < 1


@pytest.mark.full
def test_damping_sweep_at_acceptance_scale():
    config = load_config(GenConfig, presets_directory / "generate" / "full_scale.yaml")
    dataset = generate_dataset(config)
    r = build_response_matrix(dataset.granularity)
    fit = fit_2pl(r)
    scores = [score_psn(r), score_psi(fit.params, fit.abilities)]
    sweep = damping_sweep(dataset.graph, scores, [round(0.05 + 0.1 * i, 2) for i in range(10)])
    assert set(sweep["model"]) == {"PSN", "PSI"}
    assert (sweep["pearson"] > 0).all()


@pytest.mark.full
def test_irt_fits_more_items_than_naive():
    psn_total = psi_total = 0
    wins = 0
    for seed in range(5):
        dataset = generate_dataset(
            smoke_config(seed=seed, n_users=300, n_items=12, levels=1,
                         threshold_start_range=[-2.0, 2.0], byte_ranges=[[10, 80]])
        )
        r = build_response_matrix(dataset.granularity)
        fit = fit_2pl(r)
        naive = NaiveShareModel(r)
        irt = IrtShareModel(fit.params, fit.abilities)
        votes = 0
        for K in (8, 10, 12):
            psn_partition = partition_by_attitude(r.column_counts(), K, r.registry)
            psi_partition = partition_by_attitude(fit.abilities, K)
            psn = sum(result.accepted for result in goodness_of_fit(r, naive, psn_partition))
            psi = sum(result.accepted for result in goodness_of_fit(r, irt, psi_partition))
            psn_total += psn
            psi_total += psi
            votes += psi > psn
        wins += votes >= 2
    assert psi_total > 0
    assert psi_total > psn_total
    assert wins >= 3


@pytest.mark.full
def test_granularity_models_agree():
    for seed in range(5):
        dataset = generate_dataset(smoke_config(seed=seed, n_users=5000, n_items=12))
        glm = build_level_matrix(dataset.granularity)
        fit = fit_grm(glm)
        assert pearson(score_psgn(glm), score_psgi(fit.params, fit.abilities)) > 0.6
