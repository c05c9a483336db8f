//! Per-second audio features for a synthetic recording, pooled to one
//! video-level vector.
//!
//!     cargo run --example audio_features -- [input.wav]

use std::f64::consts::PI;

use ah_ensemble::audio_stats::{read_wav_mono, video_audio_stats, write_wav_mono, AudioChunkFeatures, AudioConfig, AudioFeatureExtractor};
use ah_ensemble::feature_ops::PooledStats;

fn run_example() -> ah_ensemble::Result<()> {
    let dir = tempfile::tempdir().map_err(|e| ah_ensemble::Error::io("temp dir", e))?;
    let path = match std::env::args().nth(1) {
        Some(p) => p.into(),
        None => {
            // One second of a 220 Hz tone, one of silence, half a second at 440 Hz.
            let sr = 16_000u32;
            let mut s: Vec<f64> = (0..sr).map(|i| 0.4 * (2.0 * PI * 220.0 * f64::from(i) / f64::from(sr)).sin()).collect();
            s.extend(std::iter::repeat_n(0.0, sr as usize));
            s.extend((0..sr / 2).map(|i| 0.2 * (2.0 * PI * 440.0 * f64::from(i) / f64::from(sr)).sin()));
            let p = dir.path().join("tone.wav");
            write_wav_mono(&p, &s, sr)?;
            p
        }
    };

    let (samples, sr) = read_wav_mono(&path)?;
    let extractor = AudioFeatureExtractor::new(AudioConfig::default())?;
    let chunks = extractor.signal_features(&samples, sr)?;
    println!("{}", AudioChunkFeatures::FIELDS.join("\t"));
    for c in &chunks {
        let row: Vec<String> = c.to_vec().iter().map(|v| format!("{v:.3}")).collect();
        println!("{}", row.join("\t"));
    }
    let pooled = video_audio_stats(&chunks)?;
    let names = PooledStats::column_names(&AudioChunkFeatures::FIELDS);
    println!("pooled into {} values, e.g. {} = {:.3}", names.len(), names[16], pooled.flatten()[16]);
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
