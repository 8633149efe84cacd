import math

import numpy as np
import pytest

from forestlink import (
    FadingFit,
    Family,
    MissionSpec,
    PathLossModel,
    RadioConfig,
    find_model,
    mean_path_loss,
    packet_delivery_ratio,
    pdr_by_distance,
    radio_range,
    read_log,
    sweep_heights,
    synthesize_trace,
    write_trace_csv,
)
from forestlink.channel import LinkGeometry
from forestlink.simulate import snr_measurement_bias_db

TW = find_model("mediterranean-forest")
RADIO = RadioConfig()
NAKAGAMI = FadingFit(
    family=Family.NAKAGAMI, params={"mu": 0.64, "omega": 32.27}, log_likelihood=0.0, sample_count=0
)


def _stationary_mission(d3d, h, n_messages, rate=1.0):
    d2d = math.sqrt(d3d**2 - (h - 1.3) ** 2)
    return MissionSpec(
        uav_x_m=0.0,
        uav_y_m=0.0,
        heights_m=(h,),
        path=((d2d, 0.0),),
        speed_mps=1.0,
        msg_rate_hz=rate,
        duration_s=(n_messages - 1) / rate + 1e-9,
    )


def _walk_mission(d_lo, d_hi, h, n_messages):
    span = d_hi - d_lo
    speed = 1.0
    rate = n_messages / span
    return MissionSpec(
        uav_x_m=0.0,
        uav_y_m=0.0,
        heights_m=(h,),
        path=((d_lo, 0.0), (d_hi, 0.0)),
        speed_mps=speed,
        msg_rate_hz=rate,
    )


def test_mission_json_round_trip_and_strictness():
    mission = MissionSpec(0, 0, (3.0, 10.0), ((0, 0), (10, 0)), 1.0, 0.25)
    clone = MissionSpec.from_dict(mission.to_dict())
    assert clone == mission
    with pytest.raises(ValueError, match="unknown mission keys"):
        MissionSpec.from_dict({**mission.to_dict(), "warp_speed": 9})
    with pytest.raises(ValueError, match="missing"):
        MissionSpec.from_dict({"uav": {}})
    with pytest.raises(ValueError):
        MissionSpec(0, 0, (0.0,), ((0, 0),), 1.0, 0.25)
    with pytest.raises(ValueError):
        MissionSpec(0, 0, (3.0,), ((0, 0),), 1.0, 0.25, shadow_mode="position")


def test_stationary_zero_noise_trace_is_flat():
    flat = PathLossModel("flat", TW.pl_intercept_db, TW.gamma, TW.eta_db_per_m, 0.0)
    mission = _stationary_mission(100.0, 10.0, 25)
    trace = synthesize_trace(mission, flat, RADIO, None, seed=1)
    assert len(trace) == 25
    assert np.allclose(trace.pl_db, 93.29, atol=1e-9)
    assert np.all(trace.rssi_dbm == trace.rssi_dbm[0])
    assert np.all(trace.delivered)


def test_same_seed_bitwise_identical():
    mission = _walk_mission(50, 400, 10.0, 500)
    a = synthesize_trace(mission, TW, RADIO, NAKAGAMI, seed=9)
    b = synthesize_trace(mission, TW, RADIO, NAKAGAMI, seed=9)
    for field in ("timestamp_s", "d3d_m", "pl_db", "rssi_dbm", "snr_db", "delivered"):
        assert np.array_equal(getattr(a, field), getattr(b, field))
    c = synthesize_trace(mission, TW, RADIO, NAKAGAMI, seed=10)
    assert not np.array_equal(a.pl_db, c.pl_db)


def test_partitioned_synthesis_matches_full_run(tmp_path):
    mission = _walk_mission(50, 400, 10.0, 300)
    whole = synthesize_trace(mission, TW, RADIO, NAKAGAMI, seed=4)
    parts = [
        synthesize_trace(mission, TW, RADIO, NAKAGAMI, seed=4, message_indices=idx)
        for idx in (range(0, 100), range(100, 173), range(173, len(whole)))
    ]
    stitched = np.concatenate([p.pl_db for p in parts])
    assert np.array_equal(whole.pl_db, stitched)
    # byte-identical files
    path_a = tmp_path / "a.csv"
    path_b = tmp_path / "b.csv"
    write_trace_csv(whole, path_a)
    rssi = np.concatenate([p.rssi_dbm for p in parts])
    snr = np.concatenate([p.snr_db for p in parts])
    delivered = np.concatenate([p.delivered for p in parts])
    stitched_trace = type(whole)(
        h_m=whole.h_m,
        seed=whole.seed,
        timestamp_s=np.concatenate([p.timestamp_s for p in parts]),
        d3d_m=np.concatenate([p.d3d_m for p in parts]),
        pl_db=stitched,
        rssi_dbm=rssi,
        snr_db=snr,
        delivered=delivered,
    )
    write_trace_csv(stitched_trace, path_b)
    assert path_a.read_bytes() == path_b.read_bytes()


def test_position_keyed_shadow_is_persistent():
    mission = MissionSpec(
        uav_x_m=0.0,
        uav_y_m=0.0,
        heights_m=(10.0,),
        path=((100.0, 0.0),),
        speed_mps=1.0,
        msg_rate_hz=4.0,
        duration_s=10.0,
        gps_grid_m=0.5,
        shadow_mode="position",
    )
    trace = synthesize_trace(mission, TW, RADIO, None, seed=5)
    # stationary wearer, one grid cell: a single persistent shadow draw
    assert np.all(trace.pl_db == trace.pl_db[0])


def test_energy_accounting_identity():
    mission = _walk_mission(40, 500, 10.0, 2000)
    trace = synthesize_trace(mission, TW, RADIO, NAKAGAMI, seed=6)
    reconstructed = RADIO.link_budget_db + snr_measurement_bias_db(trace.snr_db) - trace.pl_db
    assert np.max(np.abs(trace.rssi_dbm - reconstructed)) < 1e-9


def test_reported_rssi_never_drops_below_noise_floor():
    mission = _walk_mission(400, 900, 10.0, 2000)
    trace = synthesize_trace(mission, TW, RADIO, NAKAGAMI, seed=7)
    assert np.all(trace.rssi_dbm >= RADIO.noise_floor_dbm)


def test_threshold_pdr_is_half():
    d_star = radio_range(TW, RADIO, 10.0)
    mission = _stationary_mission(d_star, 10.0, 10_000, rate=10.0)
    trace = synthesize_trace(mission, TW, RADIO, None, seed=7)
    assert len(trace) == 10_000
    assert 0.47 <= packet_delivery_ratio(trace) <= 0.53


def test_pdr_extremes():
    flat = PathLossModel("flat", TW.pl_intercept_db, TW.gamma, TW.eta_db_per_m, 0.0)
    near = synthesize_trace(_stationary_mission(50.0, 10.0, 40), flat, RADIO, None, seed=1)
    assert packet_delivery_ratio(near) == 1.0
    far = synthesize_trace(_stationary_mission(2000.0, 10.0, 40), flat, RADIO, None, seed=1)
    assert packet_delivery_ratio(far) == 0.0


def test_zero_fading_pdr_is_unit_step_at_closed_form_range():
    flat = PathLossModel("flat", TW.pl_intercept_db, TW.gamma, TW.eta_db_per_m, 0.0)
    d_star = radio_range(flat, RADIO, 10.0)
    mission = _walk_mission(300, 550, 10.0, 4000)
    trace = synthesize_trace(mission, flat, RADIO, None, seed=8)
    edges = [300.0, 350.0, 400.0, d_star, 470.0, 510.0, 550.0]
    rows = pdr_by_distance(trace, edges)
    for lo, hi, _count, ratio in rows:
        if hi <= d_star:
            assert ratio == 1.0
        if lo >= d_star:
            assert ratio == 0.0


def test_radio_range_closed_form_hand_case():
    # budget 119.8 dB against the sensitivity, inverted by hand
    assert radio_range(TW, RADIO, 10.0) == pytest.approx(429.0, abs=1.0)


def test_radio_range_height_independent_when_eta_zero():
    uma = find_model("3gpp-uma-optional")
    assert radio_range(uma, RADIO, 3.0) == radio_range(uma, RADIO, 30.0)


def test_radio_range_gamma_scaling_identity():
    base = PathLossModel("m", 10.69, 4.19, 0.0, 8.05)
    double = PathLossModel("m2", 10.69, 2 * 4.19, 0.0, 8.05)
    product_a = math.log10(radio_range(base, RADIO, 10.0)) * base.gamma
    product_b = math.log10(radio_range(double, RADIO, 10.0)) * double.gamma
    assert product_a == pytest.approx(product_b, rel=1e-12)


def test_radio_range_raises_when_budget_below_intercept():
    model = PathLossModel("hopeless", 150.0, 4.0, 0.0, 8.0)
    with pytest.raises(ValueError, match="no finite range"):
        radio_range(model, RADIO, 10.0)


def test_outage_range_converges_to_mean_threshold():
    target = radio_range(TW, RADIO, 10.0)
    estimate = radio_range(
        TW, RADIO, 10.0, definition="outage", outage_p=0.5, seed=3, n_draws=100_000
    )
    assert abs(estimate - target) <= 2.0


def test_snr_term_option_extends_closed_form_range():
    base = radio_range(TW, RADIO, 10.0)
    extended = radio_range(TW, RADIO, 10.0, include_snr_term=True)
    assert extended > base


def test_sweep_rows_identical_with_shared_seed_and_zero_eta():
    model = PathLossModel("flat-eta", 10.69, 4.19, 0.0, 8.05)
    mission = MissionSpec(
        uav_x_m=0.0,
        uav_y_m=0.0,
        heights_m=(3.0, 30.0),
        path=((50.0, 0.0), (150.0, 0.0)),
        speed_mps=1.0,
        msg_rate_hz=5.0,
    )
    sweep = sweep_heights(mission, model, RADIO, NAKAGAMI, seed=11, share_seed_across_heights=True)
    a, b = sweep.rows
    assert a.predicted_range_m == b.predicted_range_m
    assert a.pdr == b.pdr
    assert a.sent == b.sent


def test_sweep_range_increases_with_height_for_positive_eta():
    mission = MissionSpec(
        uav_x_m=0.0,
        uav_y_m=0.0,
        heights_m=(3.0, 10.0, 30.0),
        path=((50.0, 0.0), (150.0, 0.0)),
        speed_mps=1.0,
        msg_rate_hz=2.0,
    )
    sweep = sweep_heights(mission, TW, RADIO, None, seed=12)
    ranges = [row.predicted_range_m for row in sweep.rows]
    assert ranges[0] < ranges[1] < ranges[2]


def test_pdr_decays_beyond_range_with_severe_fading():
    d_star = radio_range(TW, RADIO, 10.0)
    mission = _walk_mission(d_star - 150, d_star + 150, 10.0, 20_000)
    trace = synthesize_trace(mission, TW, RADIO, NAKAGAMI, seed=13)
    inside = trace.delivered[trace.d3d_m < d_star - 100]
    far = trace.delivered[trace.d3d_m > d_star + 100]
    assert np.mean(inside) > 0.5
    assert np.mean(far) < np.mean(inside)


def test_trace_csv_is_ingestible_by_the_pipeline(tmp_path):
    mission = _walk_mission(50, 300, 10.0, 400)
    trace = synthesize_trace(mission, TW, RADIO, NAKAGAMI, seed=14)
    path = tmp_path / "trace.csv"
    write_trace_csv(trace, path, header_comment="unit test")
    records = read_log(path, "range")
    assert len(records) == len(trace)
    # full-precision round trip: recovered loss equals the synthesized one
    from forestlink import samples_from_records

    samples = samples_from_records(records, RADIO)
    assert np.max(np.abs(np.sort(samples.pl_db) - np.sort(trace.pl_db))) < 1e-9


def test_geometry_below_reference_is_rejected():
    mission = MissionSpec(
        uav_x_m=0.0,
        uav_y_m=0.0,
        heights_m=(1.3,),
        path=((0.0, 0.0),),
        speed_mps=1.0,
        msg_rate_hz=1.0,
        duration_s=5.0,
    )
    with pytest.raises(ValueError, match="1 m"):
        synthesize_trace(mission, TW, RADIO, None, seed=1)


def test_mean_rssi_at_threshold_equals_sensitivity():
    # scenario behind the threshold-PDR test: mean signal level == sensitivity
    d_star = radio_range(TW, RADIO, 10.0)
    pl = mean_path_loss(TW, LinkGeometry(d_star, 10.0))
    assert RADIO.link_budget_db - pl == pytest.approx(RADIO.sensitivity_dbm, abs=1e-9)
