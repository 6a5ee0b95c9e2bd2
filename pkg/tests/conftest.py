import numpy as np
import pytest

from pipeforge.features import EmbeddingTable
from pipeforge.model import GoldAnnotation, QATask, Question


@pytest.fixture
def india_question() -> Question:
    return Question(
        id="q-india",
        text="What is the timezone of India?",
        gold={
            QATask.NED: GoldAnnotation(
                task=QATask.NED,
                items=frozenset({"http://dbpedia.org/resource/India"}),
            ),
            QATask.RL: GoldAnnotation(
                task=QATask.RL,
                items=frozenset({"http://dbpedia.org/ontology/timeZone"}),
            ),
            QATask.QB: GoldAnnotation(
                task=QATask.QB,
                query_triples=frozenset(
                    {
                        "<http://dbpedia.org/resource/India> "
                        "<http://dbpedia.org/ontology/timeZone> ?v0"
                    }
                ),
            ),
        },
    )


@pytest.fixture
def tiny_table() -> EmbeddingTable:
    vectors = {
        "what": np.array([1.0, 0.0, 0.0]),
        "is": np.array([0.0, 1.0, 0.0]),
        "the": np.array([0.0, 0.0, 1.0]),
        "timezone": np.array([1.0, 1.0, 0.0]),
        "of": np.array([0.5, 0.5, 0.5]),
        "india": np.array([0.25, 0.75, 0.0]),
    }
    return EmbeddingTable(3, vectors)


def make_questions(texts: list[str], prefix: str = "q") -> list[Question]:
    return [Question(id=f"{prefix}{i}", text=t) for i, t in enumerate(texts)]
