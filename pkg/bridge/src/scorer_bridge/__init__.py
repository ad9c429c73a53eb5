"""Completion-probability scoring for causal language models.

Speaks the harness wire protocol: requests are {id, prefix, completion},
responses are {id, logprob, num_subtokens} where logprob sums the
conditional log-probabilities of the completion's sub-tokens given the
prefix.
"""

__version__ = "0.1.0"
