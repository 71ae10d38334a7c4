use fog_core::ecg::{dtw_pattern_mine, encode_occurrences, synthetic_templates, EcgRecord};
use fog_core::pcg::estimate_heart_rate;
use fog_core::synth::{ecg, pcg, EcgSynthConfig, PcgSynthConfig};

#[test]
fn ecg_at_mit_rate_round_trips_through_detection() {
    let syn = ecg(&EcgSynthConfig { sample_rate_hz: 360.0, snr_db: Some(25.0), bpm: 72.0, ..Default::default() });
    let record = EcgRecord::new(syn.signal.clone()).unwrap();
    let ann = record.detect_qrs().unwrap();
    let truth = syn.r_peaks();
    let tol = (0.05 * 360.0) as usize;
    let hits = truth.iter().filter(|t| ann.r_peaks.iter().any(|r| r.abs_diff(**t) <= tol)).count();
    assert!(hits as f64 >= 0.99 * truth.len() as f64);
    assert!((ann.mean_rr_s().unwrap() - 60.0 / 72.0).abs() < 0.01);
    assert!(ann.wide_qrs.iter().all(|w| !w));
}

#[test]
fn mining_index_is_much_smaller_than_samples() {
    let syn = ecg(&EcgSynthConfig { sample_rate_hz: 200.0, duration_s: 20.0, ..Default::default() });
    let templates = synthetic_templates(200.0).unwrap();
    let occ = dtw_pattern_mine(&syn.signal, &templates).unwrap();
    let index = encode_occurrences(&occ).unwrap();
    // Against 16-bit storage of the raw samples.
    assert!(index.len() * 10 < syn.signal.len() * 2, "{} bytes", index.len());
}

#[test]
fn pcg_rate_tracks_the_cycle_and_flags_tachycardia() {
    let normal = pcg(&PcgSynthConfig { snr_db: Some(20.0), s2_amplitude: 0.5, ..Default::default() });
    let hr = estimate_heart_rate(&normal.signal).unwrap();
    assert!((hr.median_bpm().unwrap() - 75.0).abs() <= 2.0);
    assert!(!hr.any_abnormal());
    for period_s in [0.28, 1.0] {
        let syn = pcg(&PcgSynthConfig { period_s, snr_db: Some(20.0), ..Default::default() });
        let hr = estimate_heart_rate(&syn.signal).unwrap();
        assert!((hr.median_bpm().unwrap() - 60.0 / period_s).abs() <= 2.0, "{period_s}: {:?}", hr.median_bpm());
        assert!(hr.any_abnormal());
    }
}
