//! Per-second acoustic statistics from mono PCM.
//!
//! Chunks are one second long. Inside a chunk the spectral descriptors are
//! averaged over Hann-windowed STFT frames, the silence ratio is measured on
//! 10 ms frames and the pitch is tracked with YIN over voiced frames only.

use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_ops::{stat_pool, PooledStats};

/// Shortest chunk the feature extractor accepts.
pub const MIN_CHUNK_SAMPLES: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioConfig {
    pub n_fft: usize,
    pub hop: usize,
    pub rolloff_fraction: f64,
    pub silence_db: f64,
    pub silence_frame_secs: f64,
    pub yin_threshold: f64,
    pub fmin: f64,
    pub fmax: f64,
    /// Trailing partial chunks at least this long (seconds) are kept.
    pub min_partial_secs: f64,
}

impl Default for AudioConfig {
    fn default() -> Self {
        AudioConfig {
            n_fft: 2048,
            hop: 512,
            rolloff_fraction: 0.85,
            silence_db: -30.0,
            silence_frame_secs: 0.010,
            yin_threshold: 0.1,
            fmin: 65.0,
            fmax: 2093.0,
            min_partial_secs: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AudioChunkFeatures {
    pub rms: f64,
    pub spectral_centroid: f64,
    pub spectral_bandwidth: f64,
    pub spectral_rolloff: f64,
    pub zero_crossing_rate: f64,
    pub silence_ratio: f64,
    pub pitch_mean: f64,
    pub pitch_std: f64,
}

impl AudioChunkFeatures {
    /// Column names in CSV order.
    pub const FIELDS: [&'static str; 8] = [
        "rms",
        "centroid",
        "bandwidth",
        "rolloff",
        "zcr",
        "silence_ratio",
        "pitch_mean",
        "pitch_std",
    ];

    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.rms,
            self.spectral_centroid,
            self.spectral_bandwidth,
            self.spectral_rolloff,
            self.zero_crossing_rate,
            self.silence_ratio,
            self.pitch_mean,
            self.pitch_std,
        ]
    }
}

/// Splits a signal into consecutive one-second windows. A trailing partial
/// window is kept when it is at least `min_partial_secs` long.
pub fn chunk_audio(samples: &[f64], sample_rate: u32, min_partial_secs: f64) -> Result<Vec<&[f64]>> {
    if sample_rate == 0 {
        return Err(Error::Parameter("sample rate must be positive".into()));
    }
    let sr = sample_rate as usize;
    let mut out: Vec<&[f64]> = samples.chunks(sr).collect();
    if let Some(last) = out.last() {
        if last.len() < sr && (last.len() as f64) < min_partial_secs * sample_rate as f64 {
            out.pop();
        }
    }
    Ok(out)
}

fn periodic_hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

fn frame_starts(len: usize, frame: usize, hop: usize) -> Vec<usize> {
    if len <= frame {
        return vec![0];
    }
    (0..=(len - frame)).step_by(hop).collect()
}

struct Spectral {
    centroid: f64,
    bandwidth: f64,
    rolloff: f64,
}

fn spectral_features(chunk: &[f64], sample_rate: f64, cfg: &AudioConfig, fft: &Arc<dyn Fft<f64>>) -> Spectral {
    let n = cfg.n_fft;
    let window = periodic_hann(n);
    let bins = n / 2 + 1;
    let freqs: Vec<f64> = (0..bins).map(|k| k as f64 * sample_rate / n as f64).collect();
    let starts = frame_starts(chunk.len(), n, cfg.hop);
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    let (mut c_sum, mut b_sum, mut r_sum) = (0.0, 0.0, 0.0);

    for &s in &starts {
        for (i, b) in buf.iter_mut().enumerate() {
            let x = chunk.get(s + i).copied().unwrap_or(0.0);
            *b = Complex::new(x * window[i], 0.0);
        }
        fft.process(&mut buf);
        let mag: Vec<f64> = buf[..bins].iter().map(|c| c.norm()).collect();
        let total: f64 = mag.iter().sum();
        if total <= 0.0 {
            continue;
        }
        let centroid = freqs.iter().zip(&mag).map(|(f, m)| f * m).sum::<f64>() / total;
        let spread = freqs
            .iter()
            .zip(&mag)
            .map(|(f, m)| (f - centroid).powi(2) * m)
            .sum::<f64>()
            / total;
        let energy: f64 = mag.iter().map(|m| m * m).sum();
        let target = cfg.rolloff_fraction * energy;
        let mut acc = 0.0;
        let mut rolloff = freqs[bins - 1];
        for (f, m) in freqs.iter().zip(&mag) {
            acc += m * m;
            if acc >= target {
                rolloff = *f;
                break;
            }
        }
        c_sum += centroid;
        b_sum += spread.sqrt();
        r_sum += rolloff;
    }
    let k = starts.len() as f64;
    Spectral {
        centroid: c_sum / k,
        bandwidth: b_sum / k,
        rolloff: r_sum / k,
    }
}

fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

fn zero_crossing_rate(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let changes = x.windows(2).filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0)).count();
    changes as f64 / (x.len() - 1) as f64
}

fn silence_ratio(x: &[f64], sample_rate: f64, cfg: &AudioConfig) -> f64 {
    let frame = ((cfg.silence_frame_secs * sample_rate).round() as usize).max(1);
    let threshold = 10f64.powf(cfg.silence_db / 20.0);
    let frames: Vec<&[f64]> = if x.len() < frame {
        vec![x]
    } else {
        x.chunks_exact(frame).collect()
    };
    let silent = frames.iter().filter(|f| rms(f) < threshold).count();
    silent as f64 / frames.len() as f64
}

/// Per-frame YIN estimates over `chunk`; `None` marks an unvoiced frame.
pub fn yin_pitch_track(chunk: &[f64], sample_rate: f64, cfg: &AudioConfig) -> Vec<Option<f64>> {
    let frame_len = cfg.n_fft.min(chunk.len());
    let tau_min = ((sample_rate / cfg.fmax).floor() as usize).max(2);
    let tau_max = ((sample_rate / cfg.fmin).ceil() as usize).min(frame_len / 2);
    if tau_max <= tau_min + 1 {
        return Vec::new();
    }
    let window = frame_len - tau_max - 1;
    frame_starts(chunk.len(), frame_len, cfg.hop)
        .into_iter()
        .map(|s| yin_frame(&chunk[s..s + frame_len], window, tau_min, tau_max, sample_rate, cfg))
        .collect()
}

fn yin_frame(
    frame: &[f64],
    window: usize,
    tau_min: usize,
    tau_max: usize,
    sample_rate: f64,
    cfg: &AudioConfig,
) -> Option<f64> {
    // Difference function d(tau) for tau in 0..=tau_max.
    let diff: Vec<f64> = (0..=tau_max)
        .map(|tau| {
            (0..window)
                .map(|j| {
                    let d = frame[j] - frame[j + tau];
                    d * d
                })
                .sum()
        })
        .collect();

    // Cumulative mean normalized difference.
    let mut cmnd = vec![1.0; tau_max + 1];
    let mut running = 0.0;
    for tau in 1..=tau_max {
        running += diff[tau];
        cmnd[tau] = if running > 0.0 {
            diff[tau] * tau as f64 / running
        } else {
            1.0
        };
    }
    if running <= 0.0 {
        return None;
    }

    let mut tau = (tau_min..tau_max).find(|&t| cmnd[t] < cfg.yin_threshold)?;
    while tau + 1 < tau_max && cmnd[tau + 1] < cmnd[tau] {
        tau += 1;
    }
    let refined = if tau > 0 && tau < tau_max {
        let (a, b, c) = (cmnd[tau - 1], cmnd[tau], cmnd[tau + 1]);
        let denom = a - 2.0 * b + c;
        if denom.abs() > 1e-12 {
            tau as f64 + 0.5 * (a - c) / denom
        } else {
            tau as f64
        }
    } else {
        tau as f64
    };
    let f0 = sample_rate / refined;
    (f0.is_finite() && f0 >= cfg.fmin && f0 <= cfg.fmax).then_some(f0)
}

/// Reusable extractor holding the FFT plan.
pub struct AudioFeatureExtractor {
    cfg: AudioConfig,
    fft: Arc<dyn Fft<f64>>,
}

impl AudioFeatureExtractor {
    pub fn new(cfg: AudioConfig) -> Result<Self> {
        if cfg.n_fft < 16 || cfg.hop == 0 {
            return Err(Error::Parameter("n_fft must be >= 16 and hop positive".into()));
        }
        if !(cfg.rolloff_fraction > 0.0 && cfg.rolloff_fraction <= 1.0) {
            return Err(Error::Parameter("rolloff fraction must lie in (0, 1]".into()));
        }
        if !(cfg.fmin > 0.0 && cfg.fmax > cfg.fmin) {
            return Err(Error::Parameter("pitch search range must satisfy 0 < fmin < fmax".into()));
        }
        let fft = FftPlanner::new().plan_fft_forward(cfg.n_fft);
        Ok(AudioFeatureExtractor { cfg, fft })
    }

    pub fn config(&self) -> &AudioConfig {
        &self.cfg
    }

    pub fn chunk_features(&self, chunk: &[f64], sample_rate: u32) -> Result<AudioChunkFeatures> {
        if chunk.len() < MIN_CHUNK_SAMPLES {
            return Err(Error::InsufficientData(format!(
                "audio chunk has {} samples, need at least {MIN_CHUNK_SAMPLES}",
                chunk.len()
            )));
        }
        if sample_rate == 0 {
            return Err(Error::Parameter("sample rate must be positive".into()));
        }
        if chunk.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("non-finite audio sample".into()));
        }
        let sr = sample_rate as f64;
        let spectral = spectral_features(chunk, sr, &self.cfg, &self.fft);
        let voiced: Vec<f64> = yin_pitch_track(chunk, sr, &self.cfg).into_iter().flatten().collect();
        let (pitch_mean, pitch_std) = if voiced.is_empty() {
            (0.0, 0.0)
        } else {
            let n = voiced.len() as f64;
            let mean = voiced.iter().sum::<f64>() / n;
            let var = voiced.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / n;
            (mean, var.sqrt())
        };
        Ok(AudioChunkFeatures {
            rms: rms(chunk),
            spectral_centroid: spectral.centroid,
            spectral_bandwidth: spectral.bandwidth,
            spectral_rolloff: spectral.rolloff.min(sr / 2.0),
            zero_crossing_rate: zero_crossing_rate(chunk),
            silence_ratio: silence_ratio(chunk, sr, &self.cfg),
            pitch_mean,
            pitch_std,
        })
    }

    /// Chunks the signal and extracts features per chunk, in order.
    pub fn signal_features(&self, samples: &[f64], sample_rate: u32) -> Result<Vec<AudioChunkFeatures>> {
        use rayon::prelude::*;
        let chunks = chunk_audio(samples, sample_rate, self.cfg.min_partial_secs)?;
        chunks
            .par_iter()
            .map(|c| self.chunk_features(c, sample_rate))
            .collect()
    }
}

pub fn compute_chunk_features(chunk: &[f64], sample_rate: u32) -> Result<AudioChunkFeatures> {
    AudioFeatureExtractor::new(AudioConfig::default())?.chunk_features(chunk, sample_rate)
}

/// Pools each of the eight per-chunk fields over a video; the pooled vectors
/// follow [`AudioChunkFeatures::FIELDS`] order.
pub fn video_audio_stats(features: &[AudioChunkFeatures]) -> Result<PooledStats> {
    if features.is_empty() {
        return Err(Error::EmptyInput("no audio chunks to pool".into()));
    }
    let rows: Vec<Vec<f64>> = features.iter().map(AudioChunkFeatures::to_vec).collect();
    stat_pool(&rows)
}

/// Reads a 16-bit PCM WAV file, averaging channels down to mono and
/// normalizing to `[-1, 1]`.
pub fn read_wav_mono(path: &Path) -> Result<(Vec<f64>, u32)> {
    let wav_err = |message: String| Error::Wav {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = hound::WavReader::open(path).map_err(|e| wav_err(e.to_string()))?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(wav_err(format!(
            "expected 16-bit integer PCM, found {} bits {:?}",
            spec.bits_per_sample, spec.sample_format
        )));
    }
    let channels = spec.channels.max(1) as usize;
    let raw: Vec<i16> = reader
        .samples::<i16>()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| wav_err(e.to_string()))?;
    let mono = raw
        .chunks(channels)
        .map(|frame| frame.iter().map(|&s| s as f64 / 32768.0).sum::<f64>() / frame.len() as f64)
        .collect();
    Ok((mono, spec.sample_rate))
}

pub fn write_wav_mono(path: &Path, samples: &[f64], sample_rate: u32) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let wav_err = |e: hound::Error| Error::Wav {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(wav_err)?;
    for s in samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        w.write_sample(v).map_err(wav_err)?;
    }
    w.finalize().map_err(wav_err)
}

pub fn format_chunk_csv(features: &[AudioChunkFeatures]) -> String {
    let mut out = format!("chunk,{}\n", AudioChunkFeatures::FIELDS.join(","));
    for (i, f) in features.iter().enumerate() {
        let vals: Vec<String> = f.to_vec().iter().map(|v| v.to_string()).collect();
        out.push_str(&format!("{i},{}\n", vals.join(",")));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sine(freq: f64, amp: f64, sr: u32, secs: f64) -> Vec<f64> {
        let n = (sr as f64 * secs) as usize;
        (0..n)
            .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / sr as f64).sin())
            .collect()
    }

    #[test]
    fn chunking_rules() {
        let sr = 16_000;
        let three = vec![0.0; 48_000];
        let c = chunk_audio(&three, sr, 0.25).unwrap();
        assert_eq!(c.len(), 3);
        assert!(c.iter().all(|x| x.len() == 16_000));

        let partial = vec![0.0; 41_600];
        let c = chunk_audio(&partial, sr, 0.25).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c[2].len(), 9_600);

        let short = vec![0.0; 33_600];
        assert_eq!(chunk_audio(&short, sr, 0.25).unwrap().len(), 2);
        assert!(chunk_audio(&[], sr, 0.25).unwrap().is_empty());
    }

    #[test]
    fn sine_440_oracle() {
        // Analytic oracle: RMS = A/sqrt(2); ZCR = 2f/sr.
        let x = sine(440.0, 0.5, 16_000, 1.0);
        let f = compute_chunk_features(&x, 16_000).unwrap();
        assert!((f.rms - 0.5 / 2f64.sqrt()).abs() < 0.005, "rms {}", f.rms);
        assert!((f.zero_crossing_rate - 0.055).abs() < 0.005, "zcr {}", f.zero_crossing_rate);
        assert!((f.spectral_centroid - 440.0).abs() < 25.0, "centroid {}", f.spectral_centroid);
        assert!((f.pitch_mean - 440.0).abs() < 5.0, "pitch {}", f.pitch_mean);
        assert!(f.pitch_std <= 2.0);
        assert_eq!(f.silence_ratio, 0.0);
    }

    #[test]
    fn silence_chunk() {
        let f = compute_chunk_features(&vec![0.0; 16_000], 16_000).unwrap();
        assert_eq!(f.rms, 0.0);
        assert_eq!(f.silence_ratio, 1.0);
        assert_eq!((f.pitch_mean, f.pitch_std), (0.0, 0.0));
    }

    #[test]
    fn silence_threshold_at_minus_30_db() {
        // -29 dBFS RMS is loud enough, -31 dBFS is silent.
        let amp = |db: f64| 10f64.powf(db / 20.0) * 2f64.sqrt();
        let loud = compute_chunk_features(&sine(440.0, amp(-29.0), 16_000, 1.0), 16_000).unwrap();
        let quiet = compute_chunk_features(&sine(440.0, amp(-31.0), 16_000, 1.0), 16_000).unwrap();
        assert_eq!(loud.silence_ratio, 0.0);
        assert_eq!(quiet.silence_ratio, 1.0);
    }

    #[test]
    fn short_chunk_rejected() {
        assert!(matches!(
            compute_chunk_features(&[0.1; 100], 16_000),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn pure_tone_bandwidth_and_rolloff() {
        let sr = 16_000;
        let bin = sr as f64 / 2048.0;
        for freq in [250.0, 440.0, 1000.0, 3000.0] {
            let f = compute_chunk_features(&sine(freq, 0.3, sr, 1.0), sr).unwrap();
            assert!(f.spectral_bandwidth <= 2.0 * bin, "{freq}: bandwidth {}", f.spectral_bandwidth);
            assert!((f.spectral_rolloff - freq).abs() <= 2.0 * bin, "{freq}: rolloff {}", f.spectral_rolloff);
        }
    }

    #[test]
    fn gain_invariance() {
        let sr = 16_000;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<f64> = sine(300.0, 0.2, sr, 1.0)
            .into_iter()
            .map(|v| v + 0.02 * rng.gen_range(-1.0..1.0))
            .collect();
        let base = compute_chunk_features(&x, sr).unwrap();
        for g in [0.5, 2.0, 3.7] {
            let y: Vec<f64> = x.iter().map(|v| v * g).collect();
            let f = compute_chunk_features(&y, sr).unwrap();
            let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-12);
            assert!(rel(f.rms, g * base.rms) < 1e-9);
            assert_eq!(f.zero_crossing_rate, base.zero_crossing_rate);
            assert!(rel(f.spectral_centroid, base.spectral_centroid) < 1e-6);
            assert!(rel(f.spectral_rolloff, base.spectral_rolloff) < 1e-6);
            assert!(rel(f.pitch_mean, base.pitch_mean) < 1e-6);
        }
    }

    #[test]
    fn silence_ratio_monotone_in_gain() {
        let sr = 16_000;
        // Amplitude ramps up over the chunk so the ratio passes through intermediate values.
        let x: Vec<f64> = (0..16_000)
            .map(|i| (i as f64 / 16_000.0) * 0.1 * (2.0 * std::f64::consts::PI * 200.0 * i as f64 / sr as f64).sin())
            .collect();
        let mut last = 1.0;
        for g in [0.1, 0.3, 0.5, 1.0, 2.0, 5.0, 10.0] {
            let y: Vec<f64> = x.iter().map(|v| v * g).collect();
            let s = compute_chunk_features(&y, sr).unwrap().silence_ratio;
            assert!(s <= last + 1e-15);
            last = s;
        }
    }

    #[test]
    fn white_noise_mostly_unvoiced() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let x: Vec<f64> = (0..16_000).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let track = yin_pitch_track(&x, 16_000.0, &AudioConfig::default());
        let voiced = track.iter().filter(|p| p.is_some()).count() as f64 / track.len() as f64;
        assert!(voiced < 0.3, "voiced fraction {voiced}");
    }

    #[test]
    fn pooled_audio_stats() {
        let mk = |rms| AudioChunkFeatures {
            rms,
            spectral_centroid: 100.0,
            spectral_bandwidth: 10.0,
            spectral_rolloff: 120.0,
            zero_crossing_rate: 0.1,
            silence_ratio: 0.0,
            pitch_mean: 200.0,
            pitch_std: 1.0,
        };
        let p = video_audio_stats(&[mk(0.2), mk(0.4)]).unwrap();
        assert!((p.mean[0] - 0.3).abs() < 1e-12);
        assert!((p.std[0] - 0.1).abs() < 1e-12);
        assert!(p.std[1..].iter().all(|s| *s == 0.0));
        let single = video_audio_stats(&[mk(0.2)]).unwrap();
        assert_eq!(single.min, single.max);
        assert!(video_audio_stats(&[]).is_err());
    }

    #[test]
    fn wav_roundtrip_and_downmix() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.wav");
        write_wav_mono(&p, &[0.0, 0.5, -0.5], 8000).unwrap();
        let (x, sr) = read_wav_mono(&p).unwrap();
        assert_eq!(sr, 8000);
        assert!((x[1] - 0.5).abs() < 1e-4 && (x[2] + 0.5).abs() < 1e-4);

        let stereo = dir.path().join("s.wav");
        let spec = hound::WavSpec { channels: 2, sample_rate: 8000, bits_per_sample: 16, sample_format: hound::SampleFormat::Int };
        let mut w = hound::WavWriter::create(&stereo, spec).unwrap();
        for s in [16384i16, 0, -16384, -16384] {
            w.write_sample(s).unwrap();
        }
        w.finalize().unwrap();
        let (m, _) = read_wav_mono(&stereo).unwrap();
        assert_eq!(m, vec![0.25, -0.5]);
    }
}
