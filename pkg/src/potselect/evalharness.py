"""Corpus loading, prompt assembly and accuracy evaluation.

GSM8K records are line-delimited JSON whose answer text ends in a
``#### <number>`` marker; SVAMP records carry body/question/answer fields
(JSON array or line-delimited).  Evaluation runs the selection loop per
item, prompts the completion provider, executes the extracted answer
program and compares against the gold value.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from . import interpreter, prompts
from .augmentation import Example, ExamplePool, extract_answer_block
from .providers import ProviderError, Services
from .selection import EmptyPool, SelectionConfig, select_examples


class DatasetError(Exception):
    pass


class MalformedRecord(DatasetError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"record {line_no}: {reason}")
        self.line_no = line_no


class MissingMarker(DatasetError):
    def __init__(self, line_no: int):
        super().__init__(f"record {line_no}: answer lacks a '####' marker")
        self.line_no = line_no


@dataclass(frozen=True)
class QAItem:
    id: str
    question: str
    gold_value: float
    raw_record: dict

    def __post_init__(self) -> None:
        if not math.isfinite(self.gold_value):
            raise ValueError(f"gold_value must be finite, got {self.gold_value!r}")


_GSM8K_MARKER = re.compile(r"####\s*(-?[\d,]*\.?\d+)")


def load_gsm8k(path: str | Path) -> list[QAItem]:
    """Parse GSM8K-format JSONL; gold values come from the final #### marker."""
    items: list[QAItem] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(line_no, f"invalid JSON: {exc}") from None
            if not isinstance(record, dict) or "question" not in record or "answer" not in record:
                raise MalformedRecord(line_no, "needs 'question' and 'answer' fields")
            markers = _GSM8K_MARKER.findall(str(record["answer"]))
            if not markers:
                raise MissingMarker(line_no)
            gold = float(markers[-1].replace(",", ""))
            if not math.isfinite(gold):
                raise MalformedRecord(line_no, f"gold value {markers[-1]!r} is not finite")
            items.append(
                QAItem(
                    id=str(record.get("id", f"item-{line_no}")),
                    question=str(record["question"]),
                    gold_value=gold,
                    raw_record=record,
                )
            )
    return items


def _field(record: dict, name: str):
    for key in (name, name.capitalize(), name.upper()):
        if key in record:
            return record[key]
    return None


def load_svamp(path: str | Path) -> list[QAItem]:
    """Parse SVAMP records; the question is body + space + question sentence."""
    text = Path(path).read_text(encoding="utf-8").strip()
    if not text:
        return []
    if text.startswith("["):
        try:
            records = list(enumerate(json.loads(text), start=1))
        except json.JSONDecodeError as exc:
            raise MalformedRecord(exc.lineno, f"invalid JSON: {exc}") from None
    else:
        records = []
        for line_no, line in enumerate(text.split("\n"), start=1):
            line = line.strip()
            if line:
                try:
                    records.append((line_no, json.loads(line)))
                except json.JSONDecodeError as exc:
                    raise MalformedRecord(line_no, f"invalid JSON: {exc}") from None
    items: list[QAItem] = []
    for line_no, record in records:
        if not isinstance(record, dict):
            raise MalformedRecord(line_no, "record is not an object")
        body = _field(record, "body")
        question = _field(record, "question")
        answer = _field(record, "answer")
        if body is None or question is None or answer is None:
            raise MalformedRecord(line_no, "needs body, question and answer fields")
        try:
            gold = float(answer)
        except (TypeError, ValueError):
            raise MalformedRecord(line_no, f"answer {answer!r} is not numeric") from None
        if not math.isfinite(gold):
            raise MalformedRecord(line_no, f"answer {answer!r} is not finite")
        identifier = _field(record, "id")
        items.append(
            QAItem(
                id=str(identifier if identifier is not None else f"item-{line_no}"),
                question=f"{str(body).strip()} {str(question).strip()}",
                gold_value=gold,
                raw_record=record,
            )
        )
    return items


@dataclass(frozen=True)
class Prompt:
    blocks: tuple[Example, ...]
    test_question: str
    rendered: str


def build_prompt(chosen: list[Example], test_question: str) -> Prompt:
    """Render chosen examples plus the test question into the byte-exact template."""
    if not chosen:
        raise ValueError("chosen must be nonempty")
    rendered = prompts.few_shot_prompt(
        [(e.question, e.answer_text) for e in chosen], test_question
    )
    return Prompt(blocks=tuple(chosen), test_question=test_question, rendered=rendered)


@dataclass(frozen=True)
class ItemResult:
    item_id: str
    selected_ids: tuple[str, ...]
    completion: str | None
    value: float | None
    gold_value: float
    verdict: str  # "correct" | "incorrect"
    cause: str | None = None

    def to_json(self) -> dict:
        return {
            "item_id": self.item_id,
            "selected_ids": list(self.selected_ids),
            "completion": self.completion,
            "value": self.value,
            "gold_value": self.gold_value,
            "verdict": self.verdict,
            "cause": self.cause,
        }


@dataclass
class EvalReport:
    n_items: int
    n_correct: int
    accuracy: float
    mean_examples_used: float
    items: list[ItemResult] = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "n_items": self.n_items,
            "n_correct": self.n_correct,
            "accuracy": self.accuracy,
            "mean_examples_used": self.mean_examples_used,
        }


def evaluate(
    dataset: list[QAItem],
    pool: ExamplePool,
    selection_config: SelectionConfig,
    services: Services,
    eps_eval: float = 1e-3,
) -> EvalReport:
    """Select, prompt, execute and grade every item; failures never abort the run."""
    results: list[ItemResult] = []
    n_correct = 0
    for item in dataset:
        selected_ids: tuple[str, ...] = ()
        completion = None
        value = None
        cause = None
        correct = False
        try:
            selection = select_examples(pool, item.question, selection_config, services)
            chosen = [example for example, _ in selection.chosen]
            selected_ids = tuple(example.id for example in chosen)
            prompt = build_prompt(chosen, item.question)
            completion = services.complete_text(prompt.rendered, stop_sequences=("Question:",))
            block = extract_answer_block(completion)
            if block is None:
                cause = "parse: no answer block in completion"
            else:
                try:
                    value = interpreter.execute(interpreter.parse(block))
                except interpreter.InterpreterError as exc:
                    cause = f"execute: {exc}"
                else:
                    correct = abs(value - item.gold_value) <= eps_eval
                    if not correct:
                        cause = "wrong value"
        except ProviderError as exc:
            cause = f"provider: {exc}"
        except (EmptyPool, ValueError) as exc:
            cause = f"selection: {exc}"
        if correct:
            n_correct += 1
        results.append(
            ItemResult(
                item_id=item.id,
                selected_ids=selected_ids,
                completion=completion,
                value=value,
                gold_value=item.gold_value,
                verdict="correct" if correct else "incorrect",
                cause=cause,
            )
        )
    n_items = len(dataset)
    return EvalReport(
        n_items=n_items,
        n_correct=n_correct,
        accuracy=(n_correct / n_items) if n_items else 0.0,
        mean_examples_used=(
            sum(len(r.selected_ids) for r in results) / n_items if n_items else 0.0
        ),
        items=results,
    )


def save_report(report: EvalReport, path: str | Path, meta: dict | None = None) -> None:
    """Line-delimited per-item records plus a final summary record."""
    with open(path, "w", encoding="utf-8") as fh:
        if meta is not None:
            fh.write(json.dumps({"meta": meta}, sort_keys=True, ensure_ascii=False) + "\n")
        for item in report.items:
            fh.write(json.dumps(item.to_json(), sort_keys=True, ensure_ascii=False) + "\n")
        fh.write(json.dumps({"summary": report.summary()}, sort_keys=True, ensure_ascii=False) + "\n")
