"""Straight-line reference simulator used as an independent age oracle.

Replays a given arrival matrix and schedule sequence with plain lists,
keeps the full history of delivered generation times per UE, and computes
each slot's age directly from that history (slot minus the newest
delivered generation time; slot+1 while nothing has ever been delivered).
Deliberately shares no code with the recursive environment so the two
implementations check each other.
"""

from __future__ import annotations


def simulate_reference(arrivals, schedules, queue_capacity, packets_per_unit=1):
    """Replay arrivals/schedules; return per-slot ages, served and dropped counts.

    arrivals:  T x N integers, packets generated by UE n in slot t.
    schedules: T x N integers, bandwidth units granted to UE n in slot t.
    """
    num_slots = len(arrivals)
    if num_slots != len(schedules):
        raise ValueError("arrivals and schedules must cover the same number of slots")
    num_ues = len(arrivals[0]) if num_slots else 0

    queues = [[] for _ in range(num_ues)]
    delivered_gens = [[] for _ in range(num_ues)]
    aoi_trace = []
    served_trace = []
    dropped_trace = []

    for t in range(num_slots):
        served_row = []
        dropped_row = []
        aoi_row = []
        for n in range(num_ues):
            dropped = 0
            for _ in range(arrivals[t][n]):
                if len(queues[n]) < queue_capacity:
                    queues[n].append(t)
                else:
                    dropped += 1
            k = min(len(queues[n]), schedules[t][n] * packets_per_unit)
            if k > 0:
                delivered_gens[n].extend(queues[n][:k])
                queues[n] = queues[n][k:]
            if delivered_gens[n]:
                aoi = t - max(delivered_gens[n])
            else:
                aoi = t + 1
            served_row.append(k)
            dropped_row.append(dropped)
            aoi_row.append(aoi)
        aoi_trace.append(aoi_row)
        served_trace.append(served_row)
        dropped_trace.append(dropped_row)

    return {"aoi": aoi_trace, "served": served_trace, "dropped": dropped_trace}
