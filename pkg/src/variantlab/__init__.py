"""Campaign orchestration for agent-driven variant hunting.

variantlab schedules historical bug reports as seeds, drives a staged
LLM-agent pipeline over each one, deduplicates proposed vulnerability
scenarios against a shared coverage store, and validates proof-of-concept
findings under an explicit threat-model policy.
"""

__version__ = "0.1.0"
