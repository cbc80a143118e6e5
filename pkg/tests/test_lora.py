import math

import pytest

from lorasound.errors import (FramingError, InfeasiblePayloadError,
                              IntegrityError, StateMachineError)
from lorasound.lora import (AdrState, CapacitorSpec, Frame, LinkConfig,
                            LoRaParams, MsgType, Phase, PowerCycleState,
                            PowerEvent, adr_step, capacitor_energy,
                            crc16_ccitt_false, frame_decode, frame_encode,
                            power_cycle_advance, rx_energy, time_on_air,
                            tx_energy)


def crc16_bitwise_oracle(data: bytes) -> int:
    """Plain bit-at-a-time CRC-16/CCITT-FALSE, independent of the table version."""
    crc = 0xFFFF
    for byte in data:
        crc ^= byte << 8
        for _ in range(8):
            if crc & 0x8000:
                crc = ((crc << 1) ^ 0x1021) & 0xFFFF
            else:
                crc = (crc << 1) & 0xFFFF
    return crc


class TestParamsAndCapacitor:
    def test_param_ranges_enforced(self):
        with pytest.raises(ValueError):
            LoRaParams(6, 10)
        with pytest.raises(ValueError):
            LoRaParams(13, 10)
        with pytest.raises(ValueError):
            LoRaParams(9, 18)
        with pytest.raises(ValueError):
            LoRaParams(9, 4)

    def test_equal_thresholds_store_nothing(self):
        assert capacitor_energy(CapacitorSpec(0.1, 3.3, 3.3)) == 0.0

    def test_scenario1_budget(self):
        # 2 * 0.685 / 0.1 = 13.70 V^2 window
        spec = CapacitorSpec(0.1, 4.0, math.sqrt(16.0 - 13.70))
        assert capacitor_energy(spec) == pytest.approx(0.685, rel=0.01)

    def test_scenario2_budget(self):
        # 2 * 0.225 / 0.033 = 13.64 V^2 window (rounded)
        spec = CapacitorSpec(0.033, 4.0, math.sqrt(16.0 - 13.64))
        assert capacitor_energy(spec) == pytest.approx(0.225, rel=0.01)

    def test_invalid_voltage_order(self):
        with pytest.raises(ValueError):
            CapacitorSpec(0.1, 2.0, 3.0)


class TestTimeOnAir:
    def test_zero_payload_zero_preamble(self):
        link = LinkConfig(preamble_bits=0)
        assert time_on_air(0, LoRaParams(7, 17), link) == 0.0

    def test_example_64_bytes_sf7(self):
        toa = time_on_air(64, LoRaParams(7, 17), LinkConfig())
        assert toa == pytest.approx((512 + 96) / 5469)
        assert toa == pytest.approx(0.1112, abs=5e-5)

    def test_monotone_in_sf(self):
        link = LinkConfig()
        toas = [time_on_air(40, LoRaParams(sf, 10), link) for sf in range(7, 13)]
        assert all(a < b for a, b in zip(toas, toas[1:]))

    def test_payload_limit(self):
        with pytest.raises(InfeasiblePayloadError):
            time_on_air(64, LoRaParams(12, 10), LinkConfig())  # 51 B limit

    def test_semtech_model_close_to_linear_at_sf7(self):
        linear_link = LinkConfig()
        exact_link = LinkConfig(toa_model="semtech")
        params = LoRaParams(7, 17)
        t_lin = time_on_air(64, params, linear_link)
        t_sym = time_on_air(64, params, exact_link)
        assert t_sym > 0
        assert abs(t_sym - t_lin) / t_lin < 0.25
        assert (time_on_air(40, LoRaParams(12, 10), exact_link)
                > time_on_air(40, LoRaParams(7, 10), exact_link))


class TestEnergies:
    def test_zero_toa(self):
        assert tx_energy(LoRaParams(7, 17), 0.0, LinkConfig()) == 0.0

    def test_17dbm_example(self):
        toa = (512 + 96) / 5469
        e = tx_energy(LoRaParams(7, 17), toa, LinkConfig())
        assert e == pytest.approx(5.57e-3, rel=2e-3)

    def test_linear_in_toa(self):
        link = LinkConfig()
        params = LoRaParams(9, 11)
        assert tx_energy(params, 0.2, link) == pytest.approx(
            2 * tx_energy(params, 0.1, link))

    def test_pa_efficiency_divides(self):
        lossy = LinkConfig(pa_efficiency=0.5)
        ideal = LinkConfig()
        params = LoRaParams(7, 14)
        assert tx_energy(params, 0.1, lossy) == pytest.approx(
            2 * tx_energy(params, 0.1, ideal))

    def test_rx_window_zero(self):
        assert rx_energy(LinkConfig(rx_window_s=0.0)) == 0.0

    def test_rx_default_is_76_5_mJ(self):
        assert rx_energy(LinkConfig()) == pytest.approx(0.0765)

    def test_rx_linear_in_window(self):
        assert rx_energy(LinkConfig(rx_window_s=4.0)) == pytest.approx(
            2 * rx_energy(LinkConfig(rx_window_s=2.0)))


class TestLinkConfigValidation:
    def test_rates_must_decrease(self):
        rates = {7: 5469, 8: 3125, 9: 3125, 10: 977, 11: 537, 12: 293}
        with pytest.raises(ValueError):
            LinkConfig(data_rate_bps=rates)

    def test_rates_must_stay_in_band(self):
        rates = {7: 9000, 8: 3125, 9: 1758, 10: 977, 11: 537, 12: 293}
        with pytest.raises(ValueError):
            LinkConfig(data_rate_bps=rates)


class TestAdr:
    def test_no_step_no_change(self):
        state = AdrState()
        state.push(-1.0)  # margin = -1 + 12.5 - 10 = 1.5 at SF9
        current = LoRaParams(9, 11)
        margin = max(state.snr_history_db) - (-12.5) - 10.0
        assert 0 <= margin < 3.0
        assert adr_step(state, current) == current

    def test_spec_trace_sf12_to_sf7(self):
        state = AdrState()
        for snr in (-3.0, 10.0, 2.0):
            state.push(snr)
        rec = adr_step(state, LoRaParams(12, 17))
        # margin 10 - (-20) - 10 = 20 -> 6 steps: 5 SF steps + one 3 dB power step
        assert rec == LoRaParams(7, 14)

    def test_negative_margin_raises_power(self):
        state = AdrState()
        state.push(-21.0)  # margin = -21 + 20 - 10 = -11 -> n_step = -4
        rec = adr_step(state, LoRaParams(12, 8))
        assert rec == LoRaParams(12, 17)

    def test_output_always_in_range(self, rng):
        for _ in range(300):
            state = AdrState()
            for _ in range(int(rng.integers(1, 20))):
                state.push(float(rng.uniform(-40, 40)))
            current = LoRaParams(int(rng.integers(7, 13)),
                                 int(rng.integers(5, 18)))
            rec = adr_step(state, current)
            assert 7 <= rec.sf <= 12
            assert 5 <= rec.ptx_dbm <= 17

    def test_idempotent_once_settled(self, rng):
        state = AdrState()
        for _ in range(10):
            state.push(float(rng.uniform(-15, 15)))
        params = LoRaParams(12, 17)
        for _ in range(10):
            nxt = adr_step(state, params)
            if nxt == params:
                break
            params = nxt
        assert adr_step(state, params) == params

    def test_empty_history_rejected(self):
        with pytest.raises(ValueError):
            adr_step(AdrState(), LoRaParams(9, 11))

    def test_window_is_bounded(self):
        state = AdrState(window=5)
        for i in range(50):
            state.push(float(i))
        assert len(state.snr_history_db) == 5
        assert max(state.snr_history_db) == 49.0


class TestFrames:
    def test_check_value(self):
        data = b"123456789"
        assert crc16_bitwise_oracle(data) == 0x29B1
        assert crc16_ccitt_false(data) == 0x29B1

    def test_table_matches_bitwise_oracle(self, rng):
        for _ in range(200):
            blob = rng.bytes(int(rng.integers(0, 64)))
            assert crc16_ccitt_false(blob) == crc16_bitwise_oracle(blob)

    def test_roundtrip_random_payloads(self, rng):
        for _ in range(50):
            payload = rng.bytes(int(rng.integers(0, 223)))
            seq = int(rng.integers(0, 0x10000))
            frame = frame_decode(frame_encode(MsgType.UPLINK_SPEC, seq, payload))
            assert frame == Frame(MsgType.UPLINK_SPEC, seq, payload)

    def test_single_payload_bit_flip_detected(self, rng):
        encoded = bytearray(frame_encode(MsgType.DOWNLINK_MASK, 7, b"\x10\x07\x11"))
        encoded[7] ^= 0x04  # inside the payload
        with pytest.raises(IntegrityError):
            frame_decode(bytes(encoded))

    def test_truncation_detected(self):
        encoded = frame_encode(MsgType.UPLINK_SPEC, 1, b"abcdef")
        with pytest.raises(FramingError):
            frame_decode(encoded[:-1])

    def test_bad_magic(self):
        encoded = bytearray(frame_encode(MsgType.UPLINK_SPEC, 1, b""))
        encoded[0] = 0x5A
        with pytest.raises(FramingError):
            frame_decode(bytes(encoded))

    def test_oversize_payload_rejected(self):
        with pytest.raises(FramingError):
            frame_encode(MsgType.UPLINK_SPEC, 1, bytes(256))


class TestPowerCycle:
    def test_wake_restores_checkpoint(self):
        state = PowerCycleState(checkpointed_params=LoRaParams(9, 11),
                                volatile_params=LoRaParams(7, 5))
        woke = power_cycle_advance(state, PowerEvent.WAKE)
        assert woke.phase is Phase.RESTORE
        assert woke.volatile_params == LoRaParams(9, 11)

    def test_phase_order_is_fixed(self):
        state = power_cycle_advance(PowerCycleState(), PowerEvent.WAKE)
        seen = [state.phase]
        while state.phase is not Phase.OFF:
            state = power_cycle_advance(state, PowerEvent.PHASE_DONE)
            seen.append(state.phase)
        assert seen == [Phase.RESTORE, Phase.PREPROCESS, Phase.TX, Phase.SLEEP,
                        Phase.RX, Phase.INFERENCE, Phase.CHECKPOINT, Phase.OFF]
        assert state.last_round_complete

    def test_power_fail_in_tx_discards_inflight_update(self):
        state = PowerCycleState(checkpointed_params=LoRaParams(10, 14),
                                volatile_params=LoRaParams(10, 14))
        state = power_cycle_advance(state, PowerEvent.WAKE)
        for _ in range(2):  # restore, preprocess done -> now in TX
            state = power_cycle_advance(state, PowerEvent.PHASE_DONE)
        assert state.phase is Phase.TX
        state = state.with_volatile(LoRaParams(7, 5))  # in-flight ADR update
        state = power_cycle_advance(state, PowerEvent.POWER_FAIL)
        assert state.phase is Phase.OFF
        assert not state.last_round_complete
        woke = power_cycle_advance(state, PowerEvent.WAKE)
        assert woke.volatile_params == LoRaParams(10, 14)

    def test_full_cycle_checkpoints_downlink_recommendation(self):
        state = PowerCycleState(checkpointed_params=LoRaParams(12, 17),
                                volatile_params=LoRaParams(12, 17))
        state = power_cycle_advance(state, PowerEvent.WAKE)
        for phase in (Phase.PREPROCESS, Phase.TX, Phase.SLEEP, Phase.RX):
            state = power_cycle_advance(state, PowerEvent.PHASE_DONE)
            assert state.phase is phase
        state = power_cycle_advance(state, PowerEvent.PHASE_DONE)  # -> inference
        state = state.with_volatile(LoRaParams(8, 11))  # server recommendation
        state = power_cycle_advance(state, PowerEvent.PHASE_DONE)  # -> checkpoint
        state = power_cycle_advance(state, PowerEvent.PHASE_DONE)  # -> off
        assert state.phase is Phase.OFF
        assert state.checkpointed_params == LoRaParams(8, 11)

    def test_illegal_events(self):
        with pytest.raises(StateMachineError):
            power_cycle_advance(PowerCycleState(), PowerEvent.PHASE_DONE)
        awake = power_cycle_advance(PowerCycleState(), PowerEvent.WAKE)
        with pytest.raises(StateMachineError):
            power_cycle_advance(awake, PowerEvent.WAKE)

    def test_random_walk_restore_semantics(self, rng):
        """Any sequence containing power_fail restores checkpointed params."""
        state = PowerCycleState(checkpointed_params=LoRaParams(10, 14),
                                volatile_params=LoRaParams(10, 14))
        failures_seen = 0
        for _ in range(10_000):
            if state.phase is Phase.OFF:
                event = PowerEvent.WAKE if rng.random() < 0.9 else PowerEvent.POWER_FAIL
            else:
                event = (PowerEvent.POWER_FAIL if rng.random() < 0.15
                         else PowerEvent.PHASE_DONE)
            if event is PowerEvent.POWER_FAIL:
                failures_seen += 1
            before = state
            state = power_cycle_advance(state, event)
            if event is PowerEvent.WAKE:
                assert state.volatile_params == before.checkpointed_params
            if state.phase is Phase.RX and rng.random() < 0.5:
                state = state.with_volatile(
                    LoRaParams(int(rng.integers(7, 13)), int(rng.integers(5, 18))))
        assert failures_seen > 100
