"""Retrieval-augmented QA engine for IT-operations corpora.

Offline: parse and clean structured docs, chunk them along heading trees,
distill QA pairs, contrastively fine-tune a hashed n-gram encoder, and build
a cosine vector index. Online: retrieve top-k chunks for a question, wrap
them in a task template, and generate a grounded answer. An evaluation
harness covers retrieval accuracy, latency, and LLM-judge protocols.
"""

__version__ = "0.1.0"
