"""Bit-stable JSON certificates.

Every numeric lands in the record as an exact string: dyadics as
'm*2^e' (or a plain integer), rationals as 'a/b'.  Records are emitted
with sorted keys and no floats, so a re-run reproduces the bytes.
Wall-clock timings are the one non-deterministic field; they are
omitted when OPALG_DETERMINISTIC=1 (or strip_timings=True) so that
certificate files can be compared byte-for-byte.
"""

import json
import os

FORMAT_TAG = "opalg-cert/1"


def dyadic_str(d):
    return str(d)


def interval_record(iv):
    return {"lo": str(iv.lo), "hi": str(iv.hi)}


def deterministic_mode():
    return os.environ.get("OPALG_DETERMINISTIC", "") == "1"


def make_certificate(command, payload, timings=None, strip_timings=False):
    rec = {"format": FORMAT_TAG, "command": command}
    rec.update(payload)
    if timings and not strip_timings and not deterministic_mode():
        rec["timings"] = timings
    return rec


def render(rec):
    return json.dumps(rec, sort_keys=True, indent=2) + "\n"
