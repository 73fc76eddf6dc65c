"""Resume named-entity annotation toolkit.

Corpus model and fixtures, offset-safe BIO codecs, person-level stratified
splitting, an averaged-perceptron tagger, entity-level evaluation, and a
four-stage human-review bootstrap loop exposed over a CLI and an HTTP API.
"""

__version__ = "0.1.0"
