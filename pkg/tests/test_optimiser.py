import numpy as np
import pytest

from pipeforge.components import Registry, build_matrix
from pipeforge.features import ConfigVariant, FeatureConfig
from pipeforge.learners import ModelKind
from pipeforge.model import GoldAnnotation, QATask, Question
from pipeforge.optimiser import (
    Goal,
    PipelinePlan,
    RankedComponents,
    compose,
    execute,
    rank_components,
    rank_from_scores,
    train_predictors,
)
from pipeforge.synth import (
    SyntheticSpec,
    baseline_registry,
    flat_component,
    generate_synthetic,
    rule_component,
)


def ranking(task, *pairs):
    return RankedComponents(task=task, entries=tuple(pairs))


class TestGoal:
    def test_default_goal(self):
        goal = Goal.default()
        assert goal.tasks == (QATask.NED, QATask.RL, QATask.QB)

    def test_cl_inserted_when_class_gold_exists(self):
        q = Question(
            id="q",
            text="Which river flows through Seoul?",
            gold={
                QATask.CL: GoldAnnotation(
                    task=QATask.CL, items=frozenset({"http://dbpedia.org/ontology/River"})
                )
            },
        )
        goal = Goal.for_question(q)
        assert goal.tasks == (QATask.NED, QATask.RL, QATask.CL, QATask.QB)

    def test_invalid_goals(self):
        with pytest.raises(ValueError):
            Goal(tasks=(), k={})
        with pytest.raises(ValueError):
            Goal(tasks=(QATask.NED, QATask.NED), k={})
        with pytest.raises(ValueError):
            Goal(tasks=(QATask.NED,), k={QATask.NED: 0})


class TestRanking:
    def test_sorted_descending(self):
        r = rank_from_scores(QATask.NED, ["A", "B"], [0.9, 0.4])
        assert r.entries == (("A", 0.9), ("B", 0.4))
        assert r.best() == "A"

    def test_tie_breaks_by_id(self):
        r = rank_from_scores(QATask.NED, ["B", "A"], [0.5, 0.5])
        assert [cid for cid, _ in r.entries] == ["A", "B"]


class TestCompose:
    def goal(self, k=None):
        return Goal(tasks=(QATask.NED, QATask.RL, QATask.QB), k=k or {})

    def rankings(self):
        return {
            QATask.NED: ranking(QATask.NED, ("n1", 0.8), ("n2", 0.6), ("n3", 0.1)),
            QATask.RL: ranking(QATask.RL, ("r1", 0.5), ("r2", 0.2)),
            QATask.QB: ranking(QATask.QB, ("b1", 1.0), ("b2", 0.9)),
        }

    def test_all_k1_single_plan(self):
        plans = compose(self.goal(), self.rankings())
        assert len(plans) == 1
        plan = plans[0]
        assert plan.primary(QATask.NED) == "n1"
        assert plan.primary(QATask.RL) == "r1"
        assert plan.primary(QATask.QB) == "b1"
        assert plan.estimated_quality == pytest.approx(0.8 * 0.5 * 1.0)

    def test_k_expands_cartesian(self):
        plans = compose(
            self.goal({QATask.NED: 2, QATask.RL: 1, QATask.QB: 1}), self.rankings()
        )
        assert len(plans) == 2
        assert plans[0].estimated_quality >= plans[1].estimated_quality

    def test_product_quality_example(self):
        rankings = {
            QATask.NED: ranking(QATask.NED, ("n1", 0.8)),
            QATask.RL: ranking(QATask.RL, ("r1", 0.5)),
            QATask.QB: ranking(QATask.QB, ("b1", 1.0)),
        }
        plans = compose(self.goal(), rankings)
        assert plans[0].estimated_quality == pytest.approx(0.4)

    def test_full_k_enumerates_product_of_sizes(self):
        goal = self.goal({QATask.NED: 3, QATask.RL: 2, QATask.QB: 2})
        plans = compose(goal, self.rankings())
        assert len(plans) == 12
        primaries = {
            tuple(p.primary(t) for t in goal.tasks) for p in plans
        }
        assert len(primaries) == 12

    def test_first_plan_is_argmax_composition(self):
        goal = self.goal({QATask.NED: 3, QATask.RL: 2, QATask.QB: 2})
        plans = compose(goal, self.rankings())
        first = plans[0]
        for task, ranks in self.rankings().items():
            assert first.primary(task) == ranks.best()

    def test_argmax_invariant_under_uniform_scaling(self):
        rankings = self.rankings()
        scaled = dict(rankings)
        scaled[QATask.NED] = ranking(
            QATask.NED,
            *[(cid, s * 0.5) for cid, s in rankings[QATask.NED].entries],
        )
        goal = self.goal({QATask.NED: 3, QATask.RL: 2, QATask.QB: 2})
        orders_before = [
            tuple(p.primary(t) for t in goal.tasks) for p in compose(goal, rankings)
        ]
        orders_after = [
            tuple(p.primary(t) for t in goal.tasks) for p in compose(goal, scaled)
        ]
        assert orders_before == orders_after

    def test_k_out_of_range(self):
        with pytest.raises(ValueError):
            compose(self.goal({QATask.RL: 3}), self.rankings())


def two_entity_question():
    dbr = "http://dbpedia.org/resource/"
    dbo = "http://dbpedia.org/ontology/"
    return Question(
        id="q-india",
        text="What is the timezone of India?",
        gold={
            QATask.NED: GoldAnnotation(task=QATask.NED, items=frozenset({dbr + "India"})),
            QATask.RL: GoldAnnotation(task=QATask.RL, items=frozenset({dbo + "timeZone"})),
            QATask.QB: GoldAnnotation(
                task=QATask.QB,
                query_triples=frozenset({f"<{dbr}India> <{dbo}timeZone> ?v0"}),
            ),
        },
    )


class TestExecute:
    def registry(self, ned_rate=1.0, rl_rate=1.0):
        registry = Registry("exec")
        registry.register(flat_component("ned-a", QATask.NED, ned_rate))
        registry.register(flat_component("ned-b", QATask.NED, 1.0))
        registry.register(flat_component("rl-a", QATask.RL, rl_rate))
        registry.register(flat_component("qb-a", QATask.QB, 1.0))
        return registry

    def plan(self, with_fallback=False):
        entries_ned = (("ned-a", 0.9),) + ((("ned-b", 0.8),) if with_fallback else ())
        return PipelinePlan(
            choices={
                QATask.NED: entries_ned,
                QATask.RL: (("rl-a", 0.7),),
                QATask.QB: (("qb-a", 0.6),),
            },
            estimated_quality=0.9 * 0.7 * 0.6,
        )

    def test_sparql_for_worked_example(self):
        results, sparql = execute(self.plan(), two_entity_question(), self.registry(), seed=0)
        assert results[QATask.NED].items == {"http://dbpedia.org/resource/India"}
        assert sparql == (
            "SELECT ?v0 { <http://dbpedia.org/resource/India> "
            "<http://dbpedia.org/ontology/timeZone> ?v0 . }"
        )

    def test_strict_mode_propagates_empty(self):
        results, sparql = execute(
            self.plan(with_fallback=True),
            two_entity_question(),
            self.registry(ned_rate=0.0),
            seed=0,
            fallback=False,
        )
        assert results[QATask.NED].items == frozenset()
        assert sparql is None

    def test_fallback_invokes_next_choice(self):
        results, sparql = execute(
            self.plan(with_fallback=True),
            two_entity_question(),
            self.registry(ned_rate=0.0),
            seed=0,
            fallback=True,
        )
        assert results[QATask.NED].source_component == "ned-b"
        assert results[QATask.NED].items
        assert sparql is not None

    def test_all_fail_all_empty(self):
        registry = Registry("dead")
        registry.register(flat_component("ned-a", QATask.NED, 0.0))
        registry.register(flat_component("rl-a", QATask.RL, 0.0))
        registry.register(flat_component("qb-a", QATask.QB, 0.0))
        results, sparql = execute(self.plan(), two_entity_question(), registry, seed=0)
        assert all(not r.items for r in results.values())
        assert sparql is None


class TestTrainPredictors:
    def setup_corpus(self, n=140, seed=5):
        registry = baseline_registry()
        spec = SyntheticSpec(
            n_questions=n, seed=seed, components=tuple(registry.all_components())
        )
        questions, registry = generate_synthetic(spec)
        matrix = build_matrix(registry, questions, seed=seed)
        return questions, registry, matrix

    def test_one_predictor_per_component(self):
        questions, registry, matrix = self.setup_corpus()
        config = {t: FeatureConfig(ConfigVariant.CF1, for_task=t) for t in QATask}
        kinds = {t: ModelKind.LOGISTIC_REGRESSION for t in QATask}
        predictors = train_predictors(
            registry, questions, matrix, config, kinds, seed=1
        )
        assert len(predictors) == 27  # 18 + 5 + 2 + 2
        assert set(predictors) == {c.id for c in registry.all_components()}

    def test_degenerate_component_scores_near_constant(self):
        registry = Registry("t").register(flat_component("c", QATask.NED, 1.0))
        spec = SyntheticSpec(
            n_questions=40, seed=0, components=tuple(registry.all_components())
        )
        questions, registry = generate_synthetic(spec)
        matrix = build_matrix(registry, questions, seed=0)
        config = {QATask.NED: FeatureConfig(ConfigVariant.CF1, for_task=QATask.NED)}
        with pytest.warns(Warning):
            predictors = train_predictors(
                registry,
                questions,
                matrix,
                config,
                {QATask.NED: ModelKind.LOGISTIC_REGRESSION},
                seed=0,
            )
        vec_scores = [
            predictors["c"].score_rows(np.zeros((1, 28)))[0],
            predictors["c"].score_rows(np.ones((1, 28)))[0],
        ]
        assert all(s > 0.9 for s in vec_scores)

    def test_never_evaluated_component_is_error(self):
        questions, registry, matrix = self.setup_corpus(n=60)
        registry.register(flat_component("ned-never-run", QATask.NED, 1.0))
        config = {t: FeatureConfig(ConfigVariant.CF1, for_task=t) for t in QATask}
        with pytest.raises(ValueError, match="no evaluated questions"):
            train_predictors(
                registry,
                questions,
                matrix,
                config,
                {t: ModelKind.LOGISTIC_REGRESSION for t in QATask},
                seed=0,
            )

    def test_planted_rule_component_ranks_first_on_matching_questions(self):
        registry = Registry("planted")
        registry.register(
            rule_component("ned-caps", QATask.NED, [("case_allcaps", ">=", 1.0, 1.0)])
        )
        registry.register(flat_component("ned-flat", QATask.NED, 0.25))
        spec = SyntheticSpec(
            n_questions=420, seed=9, components=tuple(registry.all_components())
        )
        questions, registry = generate_synthetic(spec)
        matrix = build_matrix(registry, questions, seed=9)

        train_qs, test_qs = questions[:340], questions[340:]
        config = {QATask.NED: FeatureConfig(ConfigVariant.CF2, for_task=QATask.NED)}
        predictors = train_predictors(
            registry,
            train_qs,
            matrix,
            config,
            {QATask.NED: ModelKind.RANDOM_FOREST},
            hyper={QATask.NED: {"n_trees": 30}},
            seed=2,
        )
        from pipeforge.components import question_features

        caps_questions = [
            q for q in test_qs if question_features(q)["case_allcaps"] >= 1.0
        ]
        assert len(caps_questions) >= 10
        hits = 0
        for q in caps_questions:
            ranked = rank_components(
                predictors,
                q,
                QATask.NED,
                config[QATask.NED],
                registry=registry,
            )
            hits += ranked.best() == "ned-caps"
        assert hits / len(caps_questions) >= 0.9

    def test_missing_predictor_error(self):
        registry = Registry("t").register(flat_component("c", QATask.NED, 1.0))
        q = two_entity_question()
        with pytest.raises(ValueError, match="missing predictor"):
            rank_components(
                {},
                q,
                QATask.NED,
                FeatureConfig(ConfigVariant.CF1, for_task=QATask.NED),
                registry=registry,
            )
