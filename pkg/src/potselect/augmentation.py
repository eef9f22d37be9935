"""Three-stage example augmentation with executable consistency checking.

Stage 1 rephrases a question and re-infers its answer; stage 2 regenerates
the answer from a different reference example; stage 3 repeatedly modifies
the answer with a random arithmetic chain and generates a matching question.
Every generated pair must pass the two-phase consistency gate (execute and
compare outputs, then embedding similarity of the answer steps) before it
joins the pool.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import interpreter, prompts
from .interpreter import InterpreterError, ModificationChain
from .providers import Services, cosine


class EmptyGeneration(Exception):
    """The provider returned no usable text for a generation step."""


@dataclass(frozen=True)
class Provenance:
    stage: str  # "seed" | "stage1" | "stage2" | "stage3"
    iteration: int | None = None

    _STAGES = ("seed", "stage1", "stage2", "stage3")

    def __post_init__(self) -> None:
        if self.stage not in self._STAGES:
            raise ValueError(f"unknown stage {self.stage!r}")
        if (self.stage == "stage3") != (self.iteration is not None):
            raise ValueError("iteration is set exactly for stage3 provenance")

    def to_json(self) -> dict:
        out: dict = {"stage": self.stage}
        if self.iteration is not None:
            out["iteration"] = self.iteration
        return out

    @classmethod
    def from_json(cls, data: dict) -> "Provenance":
        return cls(stage=data["stage"], iteration=data.get("iteration"))


SEED = Provenance("seed")


@dataclass(frozen=True)
class ConsistencyReport:
    output_match: bool
    candidate_value: float | None
    reference_value: float | None
    step_similarity: float | None
    verdict: str  # "consistent" | "inconsistent"
    cause: str | None = None

    def to_json(self) -> dict:
        return {
            "output_match": self.output_match,
            "candidate_value": self.candidate_value,
            "reference_value": self.reference_value,
            "step_similarity": self.step_similarity,
            "verdict": self.verdict,
            "cause": self.cause,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ConsistencyReport":
        return cls(
            output_match=data["output_match"],
            candidate_value=data["candidate_value"],
            reference_value=data["reference_value"],
            step_similarity=data["step_similarity"],
            verdict=data["verdict"],
            cause=data.get("cause"),
        )


@dataclass(frozen=True)
class Example:
    """One question plus one executable answer program, with provenance."""

    id: str
    question: str
    answer_text: str
    provenance: Provenance = SEED
    parent_id: str | None = None
    consistency: ConsistencyReport | None = None

    def __post_init__(self) -> None:
        # must parse and execute at creation time
        interpreter.execute(interpreter.parse(self.answer_text))
        if (self.provenance.stage == "seed") != (self.parent_id is None):
            raise ValueError("seed examples have no parent; augmented ones must")

    def to_json(self) -> dict:
        record = {
            "id": self.id,
            "question": self.question,
            "answer_text": self.answer_text,
            "provenance": self.provenance.to_json(),
            "parent_id": self.parent_id,
        }
        if self.consistency is not None:
            record["consistency"] = self.consistency.to_json()
        return record

    @classmethod
    def from_json(cls, data: dict) -> "Example":
        consistency = data.get("consistency")
        return cls(
            id=data["id"],
            question=data["question"],
            answer_text=data["answer_text"],
            provenance=Provenance.from_json(data["provenance"]),
            parent_id=data.get("parent_id"),
            consistency=ConsistencyReport.from_json(consistency) if consistency else None,
        )


@dataclass(frozen=True)
class ExamplePool:
    examples: tuple[Example, ...]

    def __post_init__(self) -> None:
        ids = [e.id for e in self.examples]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate example ids in pool")

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)

    def get(self, example_id: str) -> Example | None:
        for example in self.examples:
            if example.id == example_id:
                return example
        return None


@dataclass(frozen=True)
class AugmentationConfig:
    iterations: int = 1  # stage-3 iteration count T
    max_retries: int = 3
    tau: float = 0.8
    rng_seed: int = 0
    eps_abs: float = 1e-6
    eps_rel: float = 1e-6

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if not -1.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [-1, 1]")


@dataclass(frozen=True)
class AttemptRecord:
    seed_id: str
    stage: int
    iteration: int | None
    attempt: int
    accepted: bool
    report: ConsistencyReport | None = None
    skip_reason: str | None = None

    def to_json(self) -> dict:
        return {
            "seed_id": self.seed_id,
            "stage": self.stage,
            "iteration": self.iteration,
            "attempt": self.attempt,
            "accepted": self.accepted,
            "report": self.report.to_json() if self.report else None,
            "skip_reason": self.skip_reason,
        }


@dataclass
class AugmentationResult:
    pool: ExamplePool
    attempts: list[AttemptRecord] = field(default_factory=list)

    def accepted_per_stage(self) -> dict[int, int]:
        counts = {1: 0, 2: 0, 3: 0}
        for example in self.pool:
            if example.provenance.stage != "seed":
                counts[int(example.provenance.stage[-1])] += 1
        return counts


def extract_answer_block(completion: str) -> str | None:
    """Pull the maximal contiguous block of dialect-parseable lines.

    Code fences are stripped first.  A valid block needs at least one
    assignment; blocks of equal length tie toward the earliest.  Returns
    None when no block qualifies.
    """
    lines = [l for l in completion.replace("\r", "").split("\n") if not l.strip().startswith("```")]
    n = len(lines)
    best: tuple[int, int] | None = None  # (start, end) half-open
    start = 0
    while start < n:
        defined: set[str] = set()
        assignments = 0
        end = start
        while end < n:
            ok, target = _line_extends(lines[end], defined)
            if not ok:
                break
            if target is not None:
                defined.add(target)
                assignments += 1
            end += 1
        if assignments > 0 and (best is None or end - start > best[1] - best[0]):
            best = (start, end)
        start = max(end, start + 1)
    if best is None:
        return None
    block = lines[best[0] : best[1]]
    while block and not block[0].strip():
        block.pop(0)
    while block and not block[-1].strip():
        block.pop()
    return "\n".join(block)


def _line_extends(line: str, defined: set[str]) -> tuple[bool, str | None]:
    """Whether ``line`` continues a dialect block given already-defined names."""
    try:
        assignment = interpreter.parse_line(line)
    except InterpreterError:
        return False, None
    if assignment is None:
        return True, None
    if not interpreter.references(assignment.expression) <= defined:
        return False, None
    return True, assignment.target


def check_consistency(
    candidate: str,
    reference: str,
    services: Services,
    *,
    tau: float,
    eps_abs: float = 1e-6,
    eps_rel: float = 1e-6,
) -> ConsistencyReport:
    """Two-phase gate: execute-and-compare outputs, then step similarity vs tau.

    All failures fold into an inconsistent verdict with a recorded cause;
    nothing raises.  A phase-1 mismatch skips phase 2 entirely.
    """
    try:
        reference_value = interpreter.execute(interpreter.parse(reference))
    except InterpreterError as exc:
        return ConsistencyReport(False, None, None, None, "inconsistent", f"reference: {exc}")
    try:
        candidate_value = interpreter.execute(interpreter.parse(candidate))
    except InterpreterError as exc:
        return ConsistencyReport(
            False, None, reference_value, None, "inconsistent", f"candidate: {exc}"
        )
    tolerance = max(eps_abs, eps_rel * abs(reference_value))
    if not abs(candidate_value - reference_value) <= tolerance:
        return ConsistencyReport(
            False, candidate_value, reference_value, None, "inconsistent", "output mismatch"
        )
    similarity = cosine(services.embed_steps(candidate), services.embed_steps(reference))
    if similarity >= tau:
        return ConsistencyReport(True, candidate_value, reference_value, similarity, "consistent")
    return ConsistencyReport(
        True, candidate_value, reference_value, similarity, "inconsistent",
        "step similarity below threshold",
    )


def rephrase_question(example: Example, services: Services) -> str:
    prompt = prompts.rephrase_prompt(example.question, example.answer_text)
    response = services.complete_text(prompt).strip()
    if not response:
        raise EmptyGeneration("rephrased question is blank")
    return response


def infer_answer(original: Example, new_question: str, services: Services) -> str:
    prompt = prompts.few_shot_prompt([(original.question, original.answer_text)], new_question)
    completion = services.complete_text(prompt, stop_sequences=("Question:",))
    block = extract_answer_block(completion)
    if block is None:
        raise EmptyGeneration("completion contains no parseable answer block")
    return block


def generate_answer(reference_example: Example, question: str, services: Services) -> str:
    prompt = prompts.few_shot_prompt(
        [(reference_example.question, reference_example.answer_text)], question
    )
    completion = services.complete_text(prompt, stop_sequences=("Question:",))
    block = extract_answer_block(completion)
    if block is None:
        raise EmptyGeneration("completion contains no parseable answer block")
    return block


def generate_question(modified_answer: str, reference: Example, services: Services) -> str:
    prompt = prompts.question_generation_prompt(
        [(reference.question, reference.answer_text)], modified_answer
    )
    response = services.complete_text(prompt).strip()
    if not response:
        raise EmptyGeneration("generated question is blank")
    return response


def random_chain(rng: np.random.Generator, length: int = 1) -> ModificationChain:
    """Seeded chain: operator uniform over + - * /, operand uniform in 1..9."""
    steps = []
    for _ in range(length):
        op = "+-*/"[int(rng.integers(0, 4))]
        operand = float(rng.integers(1, 10))
        steps.append((op, operand))
    return ModificationChain(tuple(steps))


def _lineage_ids(example: Example, pool: ExamplePool) -> set[str]:
    ids = {example.id}
    current = example
    while current.parent_id is not None:
        ids.add(current.parent_id)
        nxt = pool.get(current.parent_id)
        if nxt is None:
            break
        current = nxt
    return ids


def _stage2_reference(example: Example, pool: ExamplePool) -> Example | None:
    lineage = _lineage_ids(example, pool)
    candidates = [e for e in pool if e.id not in lineage]
    if not candidates:
        return None
    return min(candidates, key=lambda e: e.id)


def run_stage(
    example: Example,
    stage: int,
    config: AugmentationConfig,
    pool: ExamplePool,
    services: Services,
    attempts: list[AttemptRecord] | None = None,
    seed_index: int = 0,
) -> Example | None:
    """One augmentation stage on ``example``; None means aborted or skipped.

    Stage 2 expects a stage-1 product, stage 3 a stage-2 product.  Every
    consistency attempt is appended to ``attempts`` when given.
    """
    log = attempts if attempts is not None else []
    if stage == 1:
        return _run_stage1(example, config, services, log)
    if stage == 2:
        return _run_stage2(example, config, pool, services, log)
    if stage == 3:
        return _run_stage3(example, config, services, log, seed_index)
    raise ValueError(f"stage must be 1, 2 or 3, got {stage}")


def _check(config: AugmentationConfig, candidate: str, reference: str, services: Services):
    return check_consistency(
        candidate, reference, services,
        tau=config.tau, eps_abs=config.eps_abs, eps_rel=config.eps_rel,
    )


def _run_stage1(
    example: Example, config: AugmentationConfig, services: Services, log: list[AttemptRecord]
) -> Example | None:
    for attempt in range(config.max_retries + 1):
        try:
            new_question = rephrase_question(example, services)
            new_answer = infer_answer(example, new_question, services)
        except EmptyGeneration as exc:
            report = ConsistencyReport(False, None, None, None, "inconsistent", str(exc))
            log.append(AttemptRecord(example.id, 1, None, attempt, False, report))
            continue
        report = _check(config, new_answer, example.answer_text, services)
        accepted = report.verdict == "consistent"
        log.append(AttemptRecord(example.id, 1, None, attempt, accepted, report))
        if accepted:
            return Example(
                id=f"{example.id}.s1",
                question=new_question,
                answer_text=new_answer,
                provenance=Provenance("stage1"),
                parent_id=example.id,
                consistency=report,
            )
    return None


def _run_stage2(
    example: Example,
    config: AugmentationConfig,
    pool: ExamplePool,
    services: Services,
    log: list[AttemptRecord],
) -> Example | None:
    reference = _stage2_reference(example, pool)
    if reference is None:
        log.append(
            AttemptRecord(example.id, 2, None, 0, False, None, "no reference outside lineage")
        )
        return None
    for attempt in range(config.max_retries + 1):
        try:
            generated = generate_answer(reference, example.question, services)
        except EmptyGeneration as exc:
            report = ConsistencyReport(False, None, None, None, "inconsistent", str(exc))
            log.append(AttemptRecord(example.id, 2, None, attempt, False, report))
            continue
        report = _check(config, generated, example.answer_text, services)
        accepted = report.verdict == "consistent"
        log.append(AttemptRecord(example.id, 2, None, attempt, accepted, report))
        if accepted:
            return Example(
                id=f"{example.id}.s2",
                question=example.question,
                answer_text=generated,
                provenance=Provenance("stage2"),
                parent_id=example.id,
                consistency=report,
            )
    return None


def _run_stage3(
    example: Example,
    config: AugmentationConfig,
    services: Services,
    log: list[AttemptRecord],
    seed_index: int,
) -> Example | None:
    rng = np.random.default_rng([abs(config.rng_seed) % 2**32, seed_index, 3])
    question = example.question
    answer_text = example.answer_text
    final_report: ConsistencyReport | None = None
    for iteration in range(1, config.iterations + 1):
        accepted = False
        for attempt in range(config.max_retries + 1):
            chain = random_chain(rng, length=1)
            try:
                modified = interpreter.modify_answer(interpreter.parse(answer_text), chain)
                modified_text = modified.source_text
                new_question = generate_question(
                    modified_text,
                    replace(example, question=question, answer_text=answer_text),
                    services,
                )
                inferred = infer_answer(
                    replace(example, question=question, answer_text=answer_text),
                    new_question,
                    services,
                )
            except (EmptyGeneration, InterpreterError) as exc:
                report = ConsistencyReport(False, None, None, None, "inconsistent", str(exc))
                log.append(AttemptRecord(example.id, 3, iteration, attempt, False, report))
                continue
            report = _check(config, inferred, modified_text, services)
            ok = report.verdict == "consistent"
            log.append(AttemptRecord(example.id, 3, iteration, attempt, ok, report))
            if ok:
                question = new_question
                answer_text = modified_text
                final_report = report
                accepted = True
                break
        if not accepted:
            return None
    return Example(
        id=f"{example.id}.s3",
        question=question,
        answer_text=answer_text,
        provenance=Provenance("stage3", iteration=config.iterations),
        parent_id=example.id,
        consistency=final_report,
    )


def augment_pool(
    pool: ExamplePool,
    config: AugmentationConfig,
    services: Services,
    stages: tuple[int, ...] = (1, 2, 3),
) -> AugmentationResult:
    """Run the requested stages over every pool member.

    Input examples are always retained; accepted augmentations follow in
    generation order (seed index, then stage).  Later stages for a seed run
    only on the previous stage's accepted product.
    """
    if len(pool) == 0:
        raise ValueError("pool must be nonempty")
    attempts: list[AttemptRecord] = []
    augmented: list[Example] = []
    for index, seed in enumerate(pool):
        stage1 = stage2 = None
        if 1 in stages:
            stage1 = run_stage(seed, 1, config, pool, services, attempts, index)
            if stage1 is not None:
                augmented.append(stage1)
        if 2 in stages:
            if stage1 is None:
                attempts.append(
                    AttemptRecord(seed.id, 2, None, 0, False, None, "no stage-1 product")
                )
            else:
                stage2 = run_stage(stage1, 2, config, pool, services, attempts, index)
                if stage2 is not None:
                    augmented.append(stage2)
        if 3 in stages:
            if stage2 is None:
                attempts.append(
                    AttemptRecord(seed.id, 3, None, 0, False, None, "no stage-2 product")
                )
            else:
                stage3 = run_stage(stage2, 3, config, pool, services, attempts, index)
                if stage3 is not None:
                    augmented.append(stage3)
    out = ExamplePool(tuple(pool.examples) + tuple(augmented))
    return AugmentationResult(pool=out, attempts=attempts)


def load_pool(path: str | Path) -> ExamplePool:
    """Read a line-delimited pool file, skipping metadata records."""
    examples = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            if "meta" in record:
                continue
            examples.append(Example.from_json(record))
    return ExamplePool(tuple(examples))


def save_pool(pool: ExamplePool, path: str | Path, meta: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if meta is not None:
            fh.write(json.dumps({"meta": meta}, sort_keys=True, ensure_ascii=False) + "\n")
        for example in pool:
            fh.write(json.dumps(example.to_json(), sort_keys=True, ensure_ascii=False) + "\n")


def save_attempts(attempts: list[AttemptRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in attempts:
            fh.write(json.dumps(record.to_json(), sort_keys=True, ensure_ascii=False) + "\n")


def seed_example(example_id: str, question: str, answer_text: str) -> Example:
    return Example(id=example_id, question=question, answer_text=answer_text)


def verify_lineage(pool: ExamplePool, max_hops: int) -> bool:
    """Every example reaches a seed by parent links within ``max_hops``."""
    for example in pool:
        current = example
        hops = 0
        while current.provenance.stage != "seed":
            if current.parent_id is None or hops > max_hops:
                return False
            parent = pool.get(current.parent_id)
            if parent is None:
                return False
            current = parent
            hops += 1
        if hops > max_hops:
            return False
    return True
