"""When does a query skip reasoning entirely?

A query is answered directly only if a stored fact matches it with
confidence >= 0.85 and the query itself is simple (complexity <= 3).
"""

from dcot import DCoTConfig
from dcot.discriminator import complexity_score, discriminate, fact_confidence, load_facts
from dcot.tasks import default_facts_path

config = DCoTConfig()
store = load_facts(default_facts_path())
print(f"{len(store)} facts loaded")

queries = [
    "what is 2+3",
    "What is 2 + 3?",
    "what is 2^10-24",
    "what is the determinant of the 4x4 identity matrix",
    "what is the determinant of the 3x3 identity matrix",
    "det (L*U*inv(L)*inv(U))",
    "how many roads must a man walk down",
]
for q in queries:
    v = discriminate(q, store, config)
    print(f"{q[:48]:<48} p={v.p_fact:.3f} c={v.c_comp}  {v.decision:<9} {v.answer or ''}")

# confidence never drops as facts are added; an exact match settles it
q = "what is the rank of the zero matrix"
grown = store
for fact in ("zero matrix rank", "rank of the zero matrix", q):
    before = fact_confidence(q, grown)
    grown = grown.added(fact, "0")
    print(f"add {fact!r:<40} {before:.3f} -> {fact_confidence(q, grown):.3f}")
print(discriminate(q, grown, config))
print()
print("complexity of '((1+2)*3)':", complexity_score("((1+2)*3)"))
