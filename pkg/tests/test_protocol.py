"""Group lifecycle state machine: identification, membership monitoring,
leaves, rotation, handover."""
import numpy as np
import pytest

from beaconsim.mobility import make_world, torus_distance
from beaconsim.protocol import (MODE_INDIVIDUAL, MODE_MEMBER, MODE_TRANSMITTER,
                                ProtocolError, ProtocolState, TrackRecord,
                                estimate_position, identify_groups)

WORLD = make_world(24.0, 6)


class TestEstimatePosition:
    def test_single_detector(self):
        trp = np.array([[10.0, 10.0], [50.0, 50.0]])
        est = estimate_position([(0, 1e-9)], trp, WORLD)
        assert est == pytest.approx((10.0, 10.0))

    def test_equal_power_centroid(self):
        trp = np.array([[0.0, 0.0], [10.0, 0.0]])
        est = estimate_position([(0, 2e-9), (1, 2e-9)], trp, WORLD)
        assert est == pytest.approx((5.0, 0.0))

    def test_torus_aware_across_wrap(self):
        trp = np.array([[142.0, 0.0], [2.0, 0.0]])
        est = estimate_position([(0, 1.0), (1, 1.0)], trp, WORLD)
        assert est[0] == pytest.approx(0.0) or est[0] == pytest.approx(144.0)

    def test_empty_detections_unlocated(self):
        assert estimate_position([], WORLD.trp_xy, WORLD) is None

    def test_median_error_below_half_isd(self):
        # dense-grid Monte-Carlo against ground truth with 1/d^2 power proxy
        rng = np.random.default_rng(0)
        errs = []
        for _ in range(400):
            truth = rng.uniform(0, 144, 2)
            det = []
            for j, trp in enumerate(WORLD.trp_xy):
                d = torus_distance(truth, trp, WORLD)
                if d <= 32.9:
                    det.append((j, 1.0 / (d * d + 1.0)))
            est = estimate_position(det, WORLD.trp_xy, WORLD)
            errs.append(torus_distance(truth, est, WORLD))
        assert np.median(errs) <= 12.0


def rigid_records(n, window, base_positions, drift=None, periods=None):
    """Synthetic tracks for co-moving entities."""
    periods = periods or window
    recs = {}
    for e in range(n):
        rec = TrackRecord(window=window)
        for p in range(periods):
            d = drift(p) if drift else (0.0, 0.0)
            rec.add(p, (base_positions[e][0] + d[0], base_positions[e][1] + d[1]))
        recs[e] = rec
    return recs


class TestIdentify:
    def test_three_co_movers_form_one_set(self):
        recs = rigid_records(3, 10, [(10, 10), (11, 10), (10, 12)],
                             drift=lambda p: (0.5 * p, 0.2 * p))
        out = identify_groups(recs, 9, 5.0, 10, WORLD)
        assert out == [[0, 1, 2]]

    def test_single_crossing_observation_insufficient(self):
        a = TrackRecord(window=10)
        b = TrackRecord(window=10)
        for p in range(10):
            a.add(p, (10.0 + p, 10.0))
            b.add(p, (30.0 - p, 10.0))  # crosses a only around p=10
        out = identify_groups({0: a, 1: b}, 9, 5.0, 10, WORLD)
        assert out == []

    def test_two_rigid_triplets_give_two_sets(self):
        base = [(10, 10), (11, 10), (10, 12), (110, 10), (111, 10), (110, 12)]
        recs = rigid_records(6, 10, base)
        out = identify_groups(recs, 9, 5.0, 10, WORLD)
        assert out == [[0, 1, 2], [3, 4, 5]]
        # brute-force pairwise verification of the synthetic trace
        for group in out:
            for a in group:
                for b in group:
                    for k in range(1, 11):
                        d = torus_distance(recs[a].estimates[-k],
                                           recs[b].estimates[-k], WORLD)
                        assert d <= 5.0

    def test_incomplete_window_excluded(self):
        recs = rigid_records(2, 10, [(10, 10), (11, 10)], periods=6)
        assert identify_groups(recs, 5, 5.0, 10, WORLD) == []

    def test_gap_in_record_excluded(self):
        rec = TrackRecord(window=5)
        for p in (0, 1, 2, 4, 5):  # missing period 3
            rec.add(p, (10.0, 10.0))
        assert not rec.complete_through(5) or len(rec.periods) < 5
        other = TrackRecord(window=5)
        for p in range(1, 6):
            other.add(p, (10.5, 10.0))
        out = identify_groups({0: rec, 1: other}, 5, 5.0, 5, WORLD)
        assert out == []


def make_state(n=12, miss_limit=3):
    return ProtocolState(n, miss_limit=miss_limit)


class TestLifecycle:
    def test_form_picks_lowest_id_transmitter(self):
        st = make_state()
        g = st.form_group([3, 1, 2], pair=5, owner_gnb=0, tick=0)
        assert g.transmitter == 1
        assert st.ue_mode[1] == MODE_TRANSMITTER
        assert st.ue_mode[2] == MODE_MEMBER
        assert st.contexts[g.id].pair == 5

    def test_form_size_one_rejected(self):
        with pytest.raises(ProtocolError):
            make_state().form_group([4], pair=0, owner_gnb=0, tick=0)

    def test_double_membership_rejected(self):
        st = make_state()
        st.form_group([0, 1], pair=0, owner_gnb=0, tick=0)
        with pytest.raises(ProtocolError):
            st.form_group([1, 2], pair=1, owner_gnb=0, tick=0)

    def test_monitor_counts_and_leave(self):
        st = make_state(miss_limit=3)
        g = st.form_group([0, 1, 2], pair=0, owner_gnb=0, tick=0)
        for t in range(5):
            assert st.monitor_membership(g, {1: True, 2: True}, t) == []
        assert st.monitor_membership(g, {1: False, 2: True}, 5) == []
        assert st.monitor_membership(g, {1: False, 2: True}, 6) == []
        assert st.monitor_membership(g, {1: False, 2: True}, 7) == [1]

    def test_reception_resets_counter(self):
        st = make_state(miss_limit=3)
        g = st.form_group([0, 1], pair=0, owner_gnb=0, tick=0)
        st.monitor_membership(g, {1: False}, 0)
        st.monitor_membership(g, {1: False}, 1)
        st.monitor_membership(g, {1: True}, 2)
        assert g.miss_counts[1] == 0
        assert st.monitor_membership(g, {1: False}, 3) == []

    def test_leave_keeps_group_of_two(self):
        st = make_state()
        g = st.form_group([0, 1, 2], pair=0, owner_gnb=0, tick=0)
        dissolved = st.handle_member_leave(g, 2, tick=1)
        assert not dissolved
        assert g.members == [0, 1]
        assert st.ue_mode[2] == MODE_INDIVIDUAL

    def test_leave_below_two_dissolves(self):
        st = make_state()
        g = st.form_group([0, 1], pair=0, owner_gnb=0, tick=0)
        dissolved = st.handle_member_leave(g, 1, tick=1)
        assert dissolved
        assert g.id not in st.groups
        assert st.ue_mode[0] == MODE_INDIVIDUAL
        assert st.ue_mode[1] == MODE_INDIVIDUAL

    def test_unknown_member_rejected(self):
        st = make_state()
        g = st.form_group([0, 1], pair=0, owner_gnb=0, tick=0)
        with pytest.raises(ProtocolError):
            st.handle_member_leave(g, 7, tick=0)

    def test_transmitter_leave_dissolves_and_is_idempotent(self):
        st = make_state()
        g = st.form_group([0, 1, 2], pair=0, owner_gnb=0, tick=0)
        st.handle_transmitter_leave(g, tick=3)
        assert g.state == "dissolving"
        assert all(st.ue_mode[u] == MODE_INDIVIDUAL for u in (0, 1, 2))
        st.handle_transmitter_leave(g, tick=4)  # no-op
        assert len([e for e in st.events if e["event"] == "group_dissolved"]) == 1

    def test_reformation_after_window(self):
        # dissolution then re-identification of still co-moving members
        st = make_state()
        g = st.form_group([0, 1, 2], pair=0, owner_gnb=0, tick=0)
        st.handle_transmitter_leave(g, tick=0)
        recs = rigid_records(3, 10, [(20, 20), (21, 20), (20, 21)])
        cands = identify_groups(recs, 9, 5.0, 10, WORLD)
        assert cands == [[0, 1, 2]]
        g2 = st.form_group(cands[0], pair=1, owner_gnb=0, tick=10)
        assert g2.id != g.id
        assert g2.members == [0, 1, 2]

    def test_rotation_round_robin(self):
        st = make_state()
        g = st.form_group([1, 2, 3], pair=0, owner_gnb=0, tick=0)
        assert g.transmitter == 1
        assert st.rotate_transmitter(g, 1) == 2
        assert st.rotate_transmitter(g, 2) == 3
        assert st.rotate_transmitter(g, 3) == 1
        seen = set()
        for _ in range(3):
            seen.add(st.rotate_transmitter(g, 4))
        assert seen == {1, 2, 3}

    def test_rotate_inactive_rejected(self):
        st = make_state()
        g = st.form_group([0, 1], pair=0, owner_gnb=0, tick=0)
        st.handle_transmitter_leave(g, 0)
        with pytest.raises(ProtocolError):
            st.rotate_transmitter(g, 1)

    def test_add_member(self):
        st = make_state()
        g = st.form_group([0, 1], pair=0, owner_gnb=0, tick=0)
        st.add_member(g, 5, tick=2)
        assert g.members == [0, 1, 5]
        assert st.contexts[g.id].members == (0, 1, 5)


class TestHandover:
    def test_transfer_from_non_owner_rejected(self):
        st = make_state()
        g = st.form_group([0, 1], pair=0, owner_gnb=2, tick=0)
        with pytest.raises(ProtocolError):
            st.handover_context(g.id, from_gnb=1, to_gnb=3, tick=0)

    def test_hysteresis_then_single_transfer(self):
        st = make_state()
        g = st.form_group([0, 1], pair=0, owner_gnb=0, tick=0)
        st.update_serving(g.id, 1, deep_inside=True, tick=0)
        assert st.contexts[g.id].owner_gnb == 0  # streak 1 < hysteresis 2
        st.update_serving(g.id, 1, deep_inside=True, tick=1)
        assert st.contexts[g.id].owner_gnb == 1
        transfers = [e for e in st.events if e["event"] == "handover"]
        assert len(transfers) == 1
        assert transfers[0]["gnb_from"] == 0 and transfers[0]["gnb_to"] == 1

    def test_flapping_candidate_resets_streak(self):
        st = make_state()
        g = st.form_group([0, 1], pair=0, owner_gnb=0, tick=0)
        st.update_serving(g.id, 1, deep_inside=True, tick=0)
        st.update_serving(g.id, 2, deep_inside=True, tick=1)
        st.update_serving(g.id, 1, deep_inside=True, tick=2)
        assert st.contexts[g.id].owner_gnb == 0

    def test_shallow_estimate_never_transfers(self):
        # deadband: boundary-hugging estimates keep the current owner
        st = make_state()
        g = st.form_group([0, 1], pair=0, owner_gnb=0, tick=0)
        for t in range(20):
            st.update_serving(g.id, 1, deep_inside=False, tick=t)
        assert st.contexts[g.id].owner_gnb == 0

    def test_owner_detection_clears_candidate(self):
        st = make_state()
        g = st.form_group([0, 1], pair=0, owner_gnb=0, tick=0)
        st.update_serving(g.id, 1, deep_inside=True, tick=0)
        st.update_serving(g.id, 0, deep_inside=True, tick=1)
        st.update_serving(g.id, 1, deep_inside=True, tick=2)
        assert st.contexts[g.id].owner_gnb == 0

    def test_ownership_unique_and_total(self):
        st = make_state()
        a = st.form_group([0, 1], pair=0, owner_gnb=0, tick=0)
        b = st.form_group([2, 3], pair=1, owner_gnb=1, tick=0)
        st.check_invariants()
        owners = {gid: st.contexts[gid].owner_gnb for gid in st.groups}
        assert set(owners) == {a.id, b.id}


def test_track_record_rejects_time_reversal():
    rec = TrackRecord(window=3)
    rec.add(1, (0.0, 0.0))
    with pytest.raises(ProtocolError):
        rec.add(1, (1.0, 1.0))
