"""All external model interaction lives behind this package."""

from .backends import (
    ChatLikertRater,
    ChatPairwiseJudge,
    ChatRewriter,
    LikertRater,
    PairwiseJudge,
    PerplexityScorer,
    PreferenceBackend,
    RemotePerplexity,
    RemotePreference,
    RemoteSimilarity,
    RewriteGenerator,
    SimilarityScorer,
)
from .client import (
    ChatClient,
    ChatExchange,
    ChatRequest,
    HttpChatTransport,
    HttpScoringTransport,
    PriceSheet,
    complete_with_retry,
    estimate_cost,
    exponential_backoff,
)
from .prompts import (
    FewShotExample,
    PromptTemplate,
    load_template,
    parse_likert,
    parse_pairwise,
    render_likert_prompt,
    render_pairwise_prompt,
    render_prompt,
    render_rewrite_prompt,
)

__all__ = [
    "ChatClient",
    "ChatExchange",
    "ChatLikertRater",
    "ChatPairwiseJudge",
    "ChatRequest",
    "ChatRewriter",
    "FewShotExample",
    "HttpChatTransport",
    "HttpScoringTransport",
    "LikertRater",
    "PairwiseJudge",
    "PerplexityScorer",
    "PreferenceBackend",
    "PriceSheet",
    "PromptTemplate",
    "RemotePerplexity",
    "RemotePreference",
    "RemoteSimilarity",
    "RewriteGenerator",
    "SimilarityScorer",
    "complete_with_retry",
    "estimate_cost",
    "exponential_backoff",
    "load_template",
    "parse_likert",
    "parse_pairwise",
    "render_likert_prompt",
    "render_pairwise_prompt",
    "render_prompt",
    "render_rewrite_prompt",
]
