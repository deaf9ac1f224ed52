"""Answer triple-pattern and basic-graph-pattern queries directly over text.

No database sits between the query and the corpus: identifiers are
lexicalized, candidate documents retrieved from a BM25 index, answers
extracted as spans, ranked, and translated back into identifier space.
The package also builds the slot-filling training datasets that such
extractors are trained on, from a knowledge graph plus parallel text.
"""

__version__ = "0.1.0"

from .kg import Binding, Term, Triple, TriplePattern, TripleStore  # noqa: F401
