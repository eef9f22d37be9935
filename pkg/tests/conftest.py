"""Shared corpus texts, scripted-fixture builders and provider doubles."""

from __future__ import annotations

import json
import re

import numpy as np
import pytest

from potselect.augmentation import Example, ExamplePool
from potselect.providers import Fixture, HashEmbedding, ScriptedProvider, Services

BOLTS_Q = (
    "A robe takes 2 bolts of blue fiber and half that much white fiber. "
    "How many bolts in total does it take?"
)
BOLTS_A = (
    "bolts_of_blue_fiber = 2\n"
    "bolts_of_white_fiber = bolts_of_blue_fiber / 2\n"
    "ans = bolts_of_blue_fiber + bolts_of_white_fiber"
)
BOLTS_REPHRASED_Q = (
    "A robe needs 2 bolts of blue fiber and half that amount of white fiber. "
    "How many bolts of fiber are needed in total?"
)
BOLTS_VARIANT_A = (
    "bolts_of_blue_fiber = 2\n"
    "bolts_of_white_fiber = bolts_of_blue_fiber / 2\n"
    "temp0 = bolts_of_blue_fiber + bolts_of_white_fiber\n"
    "ans = temp0 * 2"
)

HOUSE_Q = (
    "Josh decides to try flipping a house. He buys a house for $80,000 and then "
    "puts in $50,000 in repairs. This increased the value of the house by 150%. "
    "How much profit did he make?"
)
HOUSE_A = (
    "cost_of_original_house = 80000\n"
    "increase_rate = 150 / 100\n"
    "value_of_house = (1 + increase_rate) * cost_of_original_house\n"
    "cost_of_repair = 50000\n"
    "ans = value_of_house - cost_of_repair - cost_of_original_house"
)

DUCK_Q = (
    "Janet's ducks lay 16 eggs per day. She eats three for breakfast every "
    "morning and bakes muffins for her friends every day with four. She sells "
    "the remainder at the farmers' market daily for $2 per fresh duck egg. "
    "How much in dollars does she make every day at the farmers' market?"
)
DUCK_A = (
    "total_eggs = 16\n"
    "eaten_eggs = 3\n"
    "baked_eggs = 4\n"
    "sold_eggs = total_eggs - eaten_eggs - baked_eggs\n"
    "dollars_per_egg = 2\n"
    "ans = sold_eggs * dollars_per_egg"
)
DUCK_MODIFIED_A = (
    DUCK_A.rsplit("\n", 1)[0]
    + "\ntemp0 = sold_eggs * dollars_per_egg\n"
    "temp1 = temp0 * 3\n"
    "temp2 = temp1 + 8\n"
    "temp3 = temp2 + 5\n"
    "temp4 = temp3 + 9\n"
    "temp5 = temp4 - 1\n"
    "ans = temp5"
)


class StubEmbedding:
    """Maps exact texts to fixed vectors; unseen texts get the zero vector."""

    provider_id = "stub-embedding"

    def __init__(self, table: dict[str, list[float]], dimension: int = 2):
        self.table = table
        self.dimension = dimension

    def embed(self, text: str) -> np.ndarray:
        return np.asarray(self.table.get(text, [0.0] * self.dimension), dtype=np.float64)


def make_services(fixtures=None, cache=None, embedding=None) -> Services:
    return Services(
        completion=ScriptedProvider(list(fixtures or [])),
        embedding=embedding or HashEmbedding(),
        cache=cache,
    )


# Pattern fixtures that answer any question deterministically from its text.
CONCEPT_FIXTURE = Fixture(
    "pattern",
    r"(?s)\A# Instruction: List the underlying concepts.*\nQuestion: ([^\n]*)\nConcepts:\Z",
    r"concepts of \1",
)
ROUGH_FIXTURE = Fixture(
    "pattern",
    r"\AQuestion: ([^\n]*)\n# Python code, return ans\n\Z",
    r"rough answer about \1",
)


def concept_text(question: str) -> str:
    """What CONCEPT_FIXTURE answers for a question (for independent oracles)."""
    return f"concepts of {question}"


def rough_text(question: str) -> str:
    """What ROUGH_FIXTURE answers for a question (for independent oracles)."""
    return f"rough answer about {question}"


def completion_fixture(test_question: str, response: str) -> Fixture:
    """Respond to the few-shot prompt whose final block asks ``test_question``."""
    pattern = (
        r"(?s)\A.*\n\nQuestion: "
        + re.escape(test_question)
        + r"\n# Python code, return ans\n\Z"
    )
    return Fixture("pattern", pattern, response)


def thirteen_seeds() -> ExamplePool:
    return ExamplePool(
        tuple(
            Example(id=f"S{i:02d}", question=f"Problem number {i}.", answer_text=f"ans = {i}")
            for i in range(1, 14)
        )
    )


def augmentation_fixtures() -> list[Fixture]:
    """Happy-path fixtures for stages 1-2 of the numbered-problem seeds."""
    return [
        Fixture(
            "pattern",
            r"(?s)\AQuestion: Problem number (\d+)\..*# Instruction: Rephrase the question\Z",
            r"Problem number \1, rephrased.",
        ),
        Fixture(
            "pattern",
            r"(?s)Question: Problem number (\d+), rephrased\.\n# Python code, return ans\n\Z",
            r"ans = \1",
        ),
    ]


def eval_dataset_records(n: int = 5) -> list[dict]:
    return [
        {
            "id": f"E{i}",
            "question": f"Evaluation question number {i}?",
            "answer": f"Reasoning text.\n#### {10 * i}",
        }
        for i in range(1, n + 1)
    ]


def eval_fixtures() -> list[Fixture]:
    """Scripted completions for the 5-item eval fixture: 3 correct, 1 wrong, 1 unparseable."""
    fixtures = [CONCEPT_FIXTURE, ROUGH_FIXTURE]
    responses = {
        1: "ans = 10",
        2: "ans = 20",
        3: "ans = 30",
        4: "ans = 0",
        5: "there is no way to compute this",
    }
    for i, response in responses.items():
        fixtures.append(completion_fixture(f"Evaluation question number {i}?", response))
    return fixtures


def eval_pool() -> ExamplePool:
    return ExamplePool(
        (
            Example(id="bolts", question=BOLTS_Q, answer_text=BOLTS_A),
            Example(id="house", question=HOUSE_Q, answer_text=HOUSE_A),
        )
    )


POOL_WORDS = [
    "eggs", "bolts", "apples", "train", "speed", "price", "total",
    "garden", "miles", "cost", "days", "boxes", "robe", "fiber",
]


def small_example(i: int, question: str, extra_lines: int = 0) -> Example:
    lines = [f"v{j} = {j + 1}" for j in range(extra_lines)]
    lines.append("ans = " + (" + ".join(f"v{j}" for j in range(extra_lines)) or "1"))
    return Example(id=f"ex{i}", question=question, answer_text="\n".join(lines))


def random_pool(rng: np.random.Generator, n_max: int = 6) -> tuple[ExamplePool, str]:
    n = int(rng.integers(1, n_max + 1))
    examples = []
    for i in range(n):
        k = int(rng.integers(3, 9))
        question = " ".join(rng.choice(POOL_WORDS, size=k))
        examples.append(small_example(i, question, extra_lines=int(rng.integers(0, 5))))
    q_t = " ".join(rng.choice(POOL_WORDS, size=int(rng.integers(3, 9))))
    return ExamplePool(tuple(examples)), q_t


def random_weights(rng: np.random.Generator):
    from potselect.selection import Weights

    values = rng.uniform(0.0, 1.0, size=4)
    values[int(rng.integers(0, 4))] += 0.5  # guarantee one strictly positive
    return Weights.from_array(values)


@pytest.fixture
def eval_environment(tmp_path):
    """On-disk pool/dataset/fixture files for CLI-level eval runs."""
    pool_path = tmp_path / "pool.jsonl"
    with open(pool_path, "w", encoding="utf-8") as fh:
        for example in eval_pool():
            fh.write(json.dumps(example.to_json()) + "\n")
    dataset_path = tmp_path / "dataset.jsonl"
    with open(dataset_path, "w", encoding="utf-8") as fh:
        for record in eval_dataset_records():
            fh.write(json.dumps(record) + "\n")
    fixtures_path = tmp_path / "fixtures.json"
    records = [
        {"match": f.kind, "text": f.text, "response": f.response} for f in eval_fixtures()
    ]
    fixtures_path.write_text(json.dumps(records), encoding="utf-8")
    return {
        "pool": str(pool_path),
        "dataset": str(dataset_path),
        "fixtures": str(fixtures_path),
        "tmp": tmp_path,
    }
