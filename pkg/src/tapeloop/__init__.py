"""tapeloop: an event-sourced runtime for LLM agents.

The session log — the tape — is the only state. Agents read it to decide
what to do next, append what they did, and can be resumed, replayed, or
audited from any intermediate tape.
"""

__version__ = "0.1.0"
