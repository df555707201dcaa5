"""Annotation backends: a keyed playback stub and an HTTP chat backend."""

from __future__ import annotations

import hashlib
import json
import os
import urllib.request
from pathlib import Path
from types import MappingProxyType
from typing import TYPE_CHECKING, Protocol

from ..errors import ConfigError, FixtureMissingError

if TYPE_CHECKING:
    from . import RenderedPrompt

TOKEN_ENV = "TRACEREWARD_API_TOKEN"
URL_ENV = "TRACEREWARD_API_URL"
MODEL_ENV = "TRACEREWARD_API_MODEL"


class AnnotationBackend(Protocol):
    def annotate(self, prompt: RenderedPrompt) -> str: ...


def prompt_hash(prompt: RenderedPrompt) -> str:
    payload = json.dumps({"system": prompt.system, "user": prompt.user},
                         sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def write_fixture(store: str | Path, prompt: RenderedPrompt, response: str) -> Path:
    store = Path(store)
    store.mkdir(parents=True, exist_ok=True)
    path = store / f"{prompt_hash(prompt)}.txt"
    path.write_text(response, encoding="utf-8")
    return path


class StubBackend:
    """Plays back stored responses keyed by the prompt hash.

    The store is a directory of ``<sha256>.txt`` files, read once at
    construction. Unknown prompts raise :class:`FixtureMissingError`.
    """

    def __init__(self, store: str | Path):
        self.store = Path(store)
        responses = {}
        for path in sorted(self.store.glob("*.txt")):
            responses[path.stem] = path.read_text(encoding="utf-8")
        self._responses = MappingProxyType(responses)

    def __len__(self) -> int:
        return len(self._responses)

    def keys(self):
        return self._responses.keys()

    def annotate(self, prompt: RenderedPrompt) -> str:
        key = prompt_hash(prompt)
        try:
            return self._responses[key]
        except KeyError:
            raise FixtureMissingError(key) from None


class HttpBackend:
    """Chat-completions style endpoint; the bearer token comes from the environment."""

    def __init__(self, url: str, model: str, token_env: str = TOKEN_ENV,
                 timeout: float = 60.0, temperature: float = 0.0):
        self.url = url
        self.model = model
        self.token_env = token_env
        self.timeout = timeout
        self.temperature = temperature

    @classmethod
    def from_env(cls) -> HttpBackend:
        url = os.environ.get(URL_ENV)
        model = os.environ.get(MODEL_ENV)
        if not url or not model:
            raise ConfigError(f"set {URL_ENV} and {MODEL_ENV} to use the HTTP backend")
        return cls(url, model)

    def build_request(self, prompt: RenderedPrompt) -> urllib.request.Request:
        token = os.environ.get(self.token_env)
        if not token:
            raise ConfigError(f"environment variable {self.token_env} is not set")
        messages = []
        if prompt.system:
            messages.append({"role": "system", "content": prompt.system})
        messages.append({"role": "user", "content": prompt.user})
        body = json.dumps({"model": self.model, "messages": messages,
                           "temperature": self.temperature}).encode("utf-8")
        return urllib.request.Request(
            self.url,
            data=body,
            headers={"Content-Type": "application/json", "Authorization": f"Bearer {token}"},
            method="POST",
        )

    def annotate(self, prompt: RenderedPrompt) -> str:
        req = self.build_request(prompt)
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            data = json.loads(resp.read().decode("utf-8"))
        return data["choices"][0]["message"]["content"]
