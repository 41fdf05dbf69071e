"""Chat-completion execution with a record/replay cassette.

Three backends share one interface, ``send(pair, config) -> str``:

* ``ReplayBackend`` answers from a cassette and never touches the network;
* ``LiveBackend`` posts to a chat-completion endpoint with retries;
* ``RecordingBackend`` wraps a live backend and appends every answer to a cassette.

:class:`Gateway` drives a backend and persists every response to the run
store before handing it back.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Protocol

import httpx

from .errors import CassetteError, ConfigError, TransportError
from .promptgen import PromptPair

log = logging.getLogger(__name__)

API_KEY_ENV = "DP_SCOUT_API_KEY"

OK = "ok"
TIMEOUT = "timeout"
HTTP_ERROR = "http_error"
REFUSED = "refused"


@dataclass(frozen=True, order=True)
class PairKey:
    example_id: int
    target_id: int
    model_name: str

    def __str__(self) -> str:
        return f"({self.example_id}, {self.target_id}, {self.model_name})"

    @classmethod
    def from_json(cls, d: dict) -> "PairKey":
        return cls(int(d["example_id"]), int(d["target_id"]), str(d["model_name"]))


@dataclass(frozen=True)
class ModelConfig:
    model_name: str
    endpoint_url: str = "https://api.openai.com/v1/chat/completions"
    temperature: float = 0.0
    max_output_tokens: int = 4096
    timeout: float = 600.0
    retries: int = 3
    backoff_base: float = 1.0

    def __post_init__(self) -> None:
        if self.retries < 0:
            raise ConfigError("retries must be >= 0")
        if self.timeout <= 0:
            raise ConfigError("timeout must be > 0")


@dataclass(frozen=True)
class ModelResponse:
    run_id: int
    pair_key: PairKey
    prompt_digest: str
    raw_text: str
    latency: float
    transport_status: str

    def __post_init__(self) -> None:
        if (self.raw_text == "") != (self.transport_status != OK):
            raise ValueError("raw_text must be empty exactly when the transport failed")

    def to_json(self) -> dict:
        d = asdict(self)
        d["pair_key"] = asdict(self.pair_key)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "ModelResponse":
        return cls(
            run_id=int(d["run_id"]),
            pair_key=PairKey.from_json(d["pair_key"]),
            prompt_digest=d["prompt_digest"],
            raw_text=d["raw_text"],
            latency=float(d["latency"]),
            transport_status=d["transport_status"],
        )


def _dump(record: dict) -> str:
    return json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n"


class Cassette:
    """Append-only JSON-lines store of recorded responses.

    A key may appear more than once only when it was re-recorded with
    ``overwrite=True``; the last line wins.
    """

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self._lock = threading.Lock()
        self._entries: dict[PairKey, dict] = {}
        if self.path.exists():
            for lineno, line in enumerate(self.path.read_text(encoding="utf-8").splitlines(), 1):
                if not line.strip():
                    continue
                try:
                    entry = json.loads(line)
                    key = PairKey.from_json(entry["pair_key"])
                except (ValueError, KeyError, TypeError) as exc:
                    raise CassetteError(f"{self.path}:{lineno}: bad cassette entry ({exc})") from exc
                self._entries[key] = entry

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: object) -> bool:
        return key in self._entries

    def record(self, key: PairKey, prompt_digest: str, raw_text: str, *, overwrite: bool = False) -> dict:
        entry = {
            "pair_key": asdict(key),
            "prompt_digest": prompt_digest,
            "raw_text": raw_text,
            "recorded_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        }
        with self._lock:
            if key in self._entries and not overwrite:
                raise CassetteError(f"cassette already holds {key}; pass overwrite to replace it")
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(_dump(entry))
            self._entries[key] = entry
        return entry

    def lookup(self, key: PairKey, prompt_digest: str) -> str:
        entry = self._entries.get(key)
        if entry is None:
            raise CassetteError(f"no cassette entry for pair {key} in {self.path}")
        if entry["prompt_digest"] != prompt_digest:
            raise CassetteError(
                f"prompt digest mismatch for pair {key}: cassette {entry['prompt_digest'][:12]}, "
                f"plan {prompt_digest[:12]}"
            )
        return entry["raw_text"]


class Backend(Protocol):
    deterministic: bool

    def send(self, pair: PromptPair, config: ModelConfig) -> str: ...


class ReplayBackend:
    deterministic = True

    def __init__(self, cassette: Cassette) -> None:
        self.cassette = cassette

    def send(self, pair: PromptPair, config: ModelConfig) -> str:
        key = PairKey(pair.example_id, pair.target_id, config.model_name)
        return self.cassette.lookup(key, pair.digest)


class _Transient(Exception):
    def __init__(self, status: str, detail: str) -> None:
        self.status = status
        self.detail = detail
        super().__init__(detail)


class LiveBackend:
    """POSTs the two messages to an OpenAI-style chat-completion endpoint."""

    deterministic = False

    def __init__(
        self,
        api_key: str | None = None,
        *,
        client: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        if not api_key:
            raise ConfigError(f"no API key: set {API_KEY_ENV}")
        self._api_key = api_key
        self._client = client
        self._sleep = sleep

    def _post(self, pair: PromptPair, config: ModelConfig) -> str:
        payload = {
            "model": config.model_name,
            "messages": [
                {"role": "system", "content": pair.message_1},
                {"role": "user", "content": pair.message_2},
            ],
            "temperature": config.temperature,
            "max_tokens": config.max_output_tokens,
        }
        headers = {"Authorization": f"Bearer {self._api_key}"}
        client = self._client or httpx.Client()
        try:
            resp = client.post(config.endpoint_url, json=payload, headers=headers, timeout=config.timeout)
        except httpx.TimeoutException as exc:
            raise _Transient(TIMEOUT, f"timed out: {exc}") from exc
        except httpx.TransportError as exc:
            raise _Transient(REFUSED, f"connection failed: {exc}") from exc
        finally:
            if self._client is None:
                client.close()
        if resp.status_code == 429 or resp.status_code >= 500:
            raise _Transient(HTTP_ERROR, f"HTTP {resp.status_code}")
        if resp.status_code != 200:
            raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}", HTTP_ERROR)
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"unexpected response body: {exc}", HTTP_ERROR) from exc

    def send(self, pair: PromptPair, config: ModelConfig) -> str:
        attempt = 0
        while True:
            try:
                return self._post(pair, config)
            except _Transient as exc:
                if attempt >= config.retries:
                    raise TransportError(
                        f"giving up on ({pair.example_id}, {pair.target_id}) after "
                        f"{attempt + 1} attempts: {exc.detail}",
                        exc.status,
                    ) from exc
                delay = config.backoff_base * 2**attempt
                log.warning("transient failure (%s); retry %d in %.1fs", exc.detail, attempt + 1, delay)
                self._sleep(delay)
                attempt += 1


class RecordingBackend:
    deterministic = False

    def __init__(self, inner: Backend, cassette: Cassette, *, overwrite: bool = False) -> None:
        self.inner = inner
        self.cassette = cassette
        self.overwrite = overwrite

    def send(self, pair: PromptPair, config: ModelConfig) -> str:
        text = self.inner.send(pair, config)
        key = PairKey(pair.example_id, pair.target_id, config.model_name)
        self.cassette.record(key, pair.digest, text, overwrite=self.overwrite)
        return text


class RunStore:
    """``runs.jsonl``: one ModelResponse per line, appended through a single lock."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self._lock = threading.Lock()

    def append(self, response: ModelResponse) -> None:
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(_dump(response.to_json()))
                fh.flush()
                os.fsync(fh.fileno())

    def read(self) -> list[ModelResponse]:
        if not self.path.exists():
            return []
        return [
            ModelResponse.from_json(json.loads(line))
            for line in self.path.read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]

    def rewrite(self, responses: Iterable[ModelResponse]) -> None:
        """Atomically replace the store, ordered by (model, run id)."""
        ordered = sorted(responses, key=lambda r: (r.pair_key.model_name, r.run_id))
        with self._lock:
            tmp = self.path.with_suffix(".tmp")
            tmp.write_text("".join(_dump(r.to_json()) for r in ordered), encoding="utf-8")
            tmp.replace(self.path)


class Gateway:
    def __init__(self, backend: Backend, store: RunStore) -> None:
        self.backend = backend
        self.store = store

    def complete(self, pair: PromptPair, config: ModelConfig, *, run_id: int = 0) -> ModelResponse:
        """Send one pair and persist the response before returning it.

        A transport failure is persisted as an empty response with its status,
        then re-raised.
        """
        key = PairKey(pair.example_id, pair.target_id, config.model_name)
        digest = pair.digest
        started = time.perf_counter()
        try:
            text = self.backend.send(pair, config)
            status = OK
        except TransportError as exc:
            text, status = "", exc.status
            failure = exc
        else:
            failure = None
        latency = 0.0 if self.backend.deterministic else round(time.perf_counter() - started, 3)
        if status == OK and text == "":
            # raw_text may only be empty for a failed transport
            failure = TransportError(f"empty completion for {key}", HTTP_ERROR)
            status = HTTP_ERROR
        response = ModelResponse(run_id, key, digest, text, latency, status)
        self.store.append(response)
        if failure is not None:
            raise failure
        return response


def run_plan(
    gateway: Gateway,
    pairs: Iterable[tuple[int, PromptPair]],
    config: ModelConfig,
    *,
    parallelism: int = 1,
) -> tuple[list[ModelResponse], list[TransportError]]:
    """Complete every ``(run_id, pair)``; returns successes and transport failures."""
    pairs = list(pairs)
    failures: list[TransportError] = []
    done: list[ModelResponse] = []

    def one(item: tuple[int, PromptPair]) -> ModelResponse | TransportError:
        run_id, pair = item
        try:
            return gateway.complete(pair, config, run_id=run_id)
        except TransportError as exc:
            return exc

    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        for result in pool.map(one, pairs):
            if isinstance(result, TransportError):
                failures.append(result)
            else:
                done.append(result)
    return done, failures
