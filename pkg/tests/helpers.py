from ecbf import ConfidenceProfile, default_schema, extract_attributes


def train(records, schema=None, **kw):
    prof = ConfidenceProfile(schema or default_schema(), **kw)
    for r in records:
        prof.observe(extract_attributes(r.fields, prof.schema), r.ts)
    if prof.open_window.n_total:
        prof.close_window()
    return prof
