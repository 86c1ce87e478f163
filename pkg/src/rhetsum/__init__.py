"""rhetsum: extractive multi-text summarization driven by a learned
attributed rhetorical structure grammar and lexical-core text embeddings.

The pipeline, end to end:

1. ``corpus``     - texts segmented into EDUs, each carrying lexical cores
                    (time, agent, object, state-change quadruples).
2. ``embedding``  - margin-trained phrase embeddings; a text's impact is the
                    sum of its core vectors.
3. ``cubes``      - grid partition of impact space; divergence-weighted
                    representative selection, nearest-distance queries,
                    size-targeted clustering.
4. ``grammar``    - counted binary production rules with recorded decision
                    contexts plus shift/reduce preference counts.
5. ``parsing``    - shift-reduce annotation sessions and autonomous parsing
                    into rhetorical structure trees.
6. ``learner``    - incremental pick-near / train-far loop under a labeling
                    budget.
7. ``teacher``    - synthetic corpora with ground-truth trees and a scripted
                    annotator for desk-scale experiments.
8. ``summarize``  - balanced nucleus-first traversal and weighted multi-text
                    EDU selection.
9. ``metrics``    - ROUGE-1/2/L, novelty, named-entity coverage, word
                    overlap, sentiment accuracy, weighted composite.
10. ``service``   - HTTP facade for the browser annotator; ``cli`` for batch
                    pipelines.
"""

__version__ = "0.1.0"
