"""Model loading and completion log-probability computation."""

from __future__ import annotations

from dataclasses import dataclass

import torch
from transformers import AutoModelForCausalLM, AutoTokenizer


class BadRequest(ValueError):
    """Malformed scoring request (empty completion, no usable context)."""


@dataclass(frozen=True)
class ScoreRequest:
    id: str
    prefix: str
    completion: str


@dataclass(frozen=True)
class ScoreResponse:
    id: str
    logprob: float
    num_subtokens: int

    def to_dict(self) -> dict:
        return {"id": self.id, "logprob": self.logprob, "num_subtokens": self.num_subtokens}


class CompletionScorer:
    """Scores p(completion | prefix) by summing sub-token log-probabilities.

    Scoring is greedy and deterministic; batches are processed one query
    at a time (scoring is serialized per device), so batch and single
    results are identical.
    """

    def __init__(self, model_id: str, device: str = "cpu"):
        self.model_id = model_id
        self.device = torch.device(device)
        self.tokenizer = AutoTokenizer.from_pretrained(model_id)
        self.model = AutoModelForCausalLM.from_pretrained(model_id)
        self.model.to(self.device)
        self.model.eval()

    def _encode(self, text: str) -> list[int]:
        return self.tokenizer(text, add_special_tokens=False).input_ids

    def score(self, prefix: str, completion: str) -> tuple[float, int]:
        """Returns (logprob, num_subtokens) for the completion."""
        if not completion:
            raise BadRequest("completion must be nonempty")
        full = self._encode(prefix + completion)
        pre = self._encode(prefix)
        # the prefix tokenization can merge differently at the boundary;
        # score everything after the longest shared token prefix
        boundary = 0
        for a, b in zip(pre, full):
            if a != b:
                break
            boundary += 1
        if boundary == len(full):
            raise BadRequest("completion contributed no tokens")
        if boundary == 0:
            bos = self.tokenizer.bos_token_id
            if bos is None:
                raise BadRequest("empty prefix and the tokenizer has no BOS token")
            full = [bos] + full
            boundary = 1
        if len(full) > getattr(self.model.config, "n_positions", 10**9):
            raise BadRequest(f"query of {len(full)} tokens exceeds the model context")
        ids = torch.tensor([full], dtype=torch.long, device=self.device)
        with torch.no_grad():
            logits = self.model(input_ids=ids[:, :-1]).logits[0]
        logprobs = torch.log_softmax(logits.float(), dim=-1)
        total = 0.0
        for t in range(boundary, len(full)):
            total += float(logprobs[t - 1, full[t]])
        return total, len(full) - boundary

    def score_request(self, req: ScoreRequest) -> ScoreResponse:
        logprob, n = self.score(req.prefix, req.completion)
        return ScoreResponse(id=req.id, logprob=logprob, num_subtokens=n)

    def score_batch(self, reqs: list[ScoreRequest]) -> list[ScoreResponse]:
        return [self.score_request(r) for r in reqs]
