"""Order checker for per-slot flow milestones.

Each milestone kind maps to one letter and a slot's milestone string must
match the direction's pattern. Step numbers travel with the events, so the
check also confirms the step tags agree with the kind.
"""

import re

from ..fronthaul.packet import segment_lengths

UL_LETTERS = {
    "ul_config_request": ("A", 1),
    "cplane_tx": ("B", 2),
    "uplane_dma": ("C", 3),
    "reorder_place": ("D", 4),
    "ul_pipeline_start": ("E", 5),
    "ul_pipeline_done": ("F", 5),
    "ul_output_delivered": ("G", 6),
}
UL_PATTERN = re.compile(r"ABC[CD]*EFG")

DL_LETTERS = {
    "dl_config_request": ("A", 1),
    "dl_tb_received": ("B", 2),
    "dl_pipeline_trigger": ("C", 2),
    "cplane_tx": ("D", 3),
    "iq_stored": ("E", 4),
    "uplane_tx": ("F", 5),
}
DL_PATTERN_INLINE = re.compile(r"ABCDEF+")
DL_PATTERN_LOOKASIDE = re.compile(r"ACDEF+")


def milestones(records, slot):
    """Records of ``slot`` that carry a ``step`` tag, in trace order."""
    key = str(slot)
    return [r for r in records if r.get("step") is not None and str(r.get("slot")) == key]


def _scenario(records):
    for r in records:
        if r.actor == "sim" and r.kind == "scenario":
            return r
    raise ValueError("trace has no scenario header")


def check_slot_flow(records, slot):
    """Return ``(ok, detail)`` for one slot's milestone order."""
    records = list(records)
    head = _scenario(records)
    direction, mode = str(head["direction"]), str(head["mode"])
    ms = milestones(records, slot)
    letters = DL_LETTERS if direction == "downlink" else UL_LETTERS
    word = []
    for r in ms:
        if r.kind not in letters:
            return False, f"unexpected milestone {r.kind}"
        letter, step = letters[r.kind]
        if int(r["step"]) != step:
            return False, f"{r.kind} tagged step {r['step']}, expected {step}"
        word.append(letter)
    word = "".join(word)
    times = [r.time_us for r in ms]
    if times != sorted(times):
        return False, "milestone timestamps go backwards"

    if direction == "uplink":
        if not UL_PATTERN.fullmatch(word):
            return False, f"uplink milestone order {word!r}"
        dma_seen = set()
        placed = []
        for r in ms:
            if r.kind == "uplane_dma":
                dma_seen.add(int(r["seq"]))
            elif r.kind == "reorder_place":
                seq = int(r["seq"])
                if seq not in dma_seen:
                    return False, f"seq {seq} placed before it arrived"
                placed.append(seq)
        burst = [r for r in records if r.kind == "uplane_burst" and str(r.get("slot")) == str(slot)]
        expected = int(burst[0]["packets"]) if burst else None
        if sorted(placed) != list(range(expected if expected is not None else len(placed))):
            return False, f"placements {sorted(placed)} do not cover {expected} packets"
        return True, word

    pattern = DL_PATTERN_INLINE if mode == "inline" else DL_PATTERN_LOOKASIDE
    if not pattern.fullmatch(word):
        return False, f"downlink milestone order {word!r}"
    stored = next(r for r in ms if r.kind == "iq_stored")
    expect = len(segment_lengths(int(stored["bytes"]), int(head["mtu"])))
    seqs = [int(r["seq"]) for r in ms if r.kind == "uplane_tx"]
    if seqs != list(range(expect)):
        return False, f"emitted seqs {seqs} != 0..{expect - 1}"
    return True, word
