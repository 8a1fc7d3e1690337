"""
Learning a confidence profile
=============================

Confidence is a frequency: how often an attribute value, or a pair of
values, shows up in legitimate traffic. A packet's score is the mean
confidence of its attribute-value pairs.
"""

import numpy as np

from ecbf import ConfidenceProfile, default_schema, extract_attributes
from ecbf.traceio import GeneratorConfig, generate_trace

schema = default_schema()
legit = generate_trace(GeneratorConfig("legit", 10_000, seed=42))

profile = ConfidenceProfile(schema)
for r in legit:
    profile.observe(extract_attributes(r.fields, schema), r.ts)
profile.close_window()
print("N_n =", profile.n_total, "windows closed:", profile.windows_closed)

###############################################################################
# Single-attribute confidences for TTL sum to one.
ttl = [a.name for a in schema.attributes].index("ttl")
for v in sorted(profile.cumulative.singles[ttl]):
    print(f"Conf(ttl={v}) = {profile.conf_single(ttl, v):.4f}")

###############################################################################
# The most frequent (protocol, ttl) pairs.
for (proto, t), c in profile.top_pairs(0, 5):
    print(f"Conf(protocol={proto}, ttl={t}) = {c:.4f}")

###############################################################################
# Score distribution of legitimate packets versus random spoofed packets.
spoof = generate_trace(GeneratorConfig("attack-random", 10_000, seed=43))
legit_scores = np.array([profile.score(extract_attributes(r.fields, schema)) for r in legit])
spoof_scores = np.array([profile.score(extract_attributes(r.fields, schema)) for r in spoof])
print("legit: min %.4f median %.4f" % (legit_scores.min(), np.median(legit_scores)))
print("spoof: max %.4f, fraction exactly 0: %.4f" % (spoof_scores.max(), np.mean(spoof_scores == 0)))
