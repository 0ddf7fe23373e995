use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::label::{LabelMode, PersonalityProfile};
use super::recording::{parse_personality, parse_recording, GazeSample};
use super::window::{quality_filter, window_stream, GazeWindow, CHANNELS, WINDOW_LEN};
use crate::error::{Error, Result};

/// Outcome of windowing a set of recordings.
#[derive(Clone, Debug, Default)]
pub struct CorpusReport {
    pub windows: Vec<GazeWindow>,
    pub total_windows: usize,
    pub rejected: usize,
}

/// Windows every recording and keeps only the windows that pass
/// [`quality_filter`].
pub fn build_windows(
    recordings: &[(String, Vec<GazeSample>)],
    profiles: &BTreeMap<String, PersonalityProfile>,
    mode: LabelMode,
    stride: usize,
) -> Result<CorpusReport> {
    let mut report = CorpusReport::default();
    for (pid, samples) in recordings {
        let profile = profiles.get(pid).ok_or_else(|| {
            Error::Config(format!("participant {pid:?} has no personality entry"))
        })?;
        for frames in window_stream(samples, WINDOW_LEN, stride) {
            report.total_windows += 1;
            if quality_filter(&frames) {
                report.windows.push(GazeWindow::new(frames, *profile, mode, pid)?);
            } else {
                report.rejected += 1;
            }
        }
    }
    Ok(report)
}

/// Loads every `*.csv` under `data_dir` (file stem = participant id) plus
/// the personality table, then windows and filters.
pub fn load_corpus(data_dir: &Path, personality: &Path, mode: LabelMode, stride: usize) -> Result<CorpusReport> {
    let profiles = parse_personality(personality)?;
    let personality_canon = personality.canonicalize().ok();
    let mut paths: Vec<PathBuf> = fs::read_dir(data_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .filter(|p| p.canonicalize().ok() != personality_canon)
        .collect();
    paths.sort();
    let mut recordings = Vec::new();
    for p in paths {
        let pid = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        if !profiles.contains_key(&pid) {
            warn!("skipping {}: no personality entry for {pid:?}", p.display());
            continue;
        }
        recordings.push((pid.clone(), parse_recording(&p, &pid)?));
    }
    if recordings.is_empty() {
        return Err(Error::Empty(format!("no recordings found in {}", data_dir.display())));
    }
    let report = build_windows(&recordings, &profiles, mode, stride)?;
    info!(
        "{} recordings -> {} windows, {} rejected by quality filter",
        recordings.len(),
        report.total_windows,
        report.rejected
    );
    Ok(report)
}

/// Splits by participant: no participant lands in both sets. At least one
/// participant always goes to the test side.
pub fn split_dataset(windows: &[GazeWindow], test_fraction: f64, seed: u64) -> Result<(Vec<GazeWindow>, Vec<GazeWindow>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::CannotSplit(format!("test fraction {test_fraction} outside (0, 1)")));
    }
    let mut ids: Vec<&str> = windows
        .iter()
        .map(|w| w.participant_id.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if ids.len() < 2 {
        return Err(Error::CannotSplit(format!("{} participant(s), need at least 2", ids.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let n_test = ((ids.len() as f64 * test_fraction).floor() as usize).clamp(1, ids.len() - 1);
    let test_ids: BTreeSet<&str> = ids[..n_test].iter().copied().collect();
    let (test, train): (Vec<_>, Vec<_>) = windows
        .iter()
        .cloned()
        .partition(|w| test_ids.contains(w.participant_id.as_str()));
    Ok((train, test))
}

const STORE_MAGIC: &[u8; 4] = b"GWIN";
const STORE_VERSION: u32 = 1;

/// Writes device-space windows to a compact binary file.
pub fn save_windows(path: &Path, windows: &[GazeWindow]) -> Result<()> {
    let mut buf = Vec::with_capacity(16 + windows.len() * (WINDOW_LEN * CHANNELS * 8 + 32));
    buf.extend_from_slice(STORE_MAGIC);
    buf.extend_from_slice(&STORE_VERSION.to_le_bytes());
    buf.extend_from_slice(&(windows.len() as u64).to_le_bytes());
    for w in windows {
        let id = w.participant_id.as_bytes();
        buf.extend_from_slice(&(id.len() as u32).to_le_bytes());
        buf.extend_from_slice(id);
        buf.extend_from_slice(&w.profile.bins());
        for row in &w.frames {
            for v in row {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

pub fn load_windows(path: &Path, mode: LabelMode) -> Result<Vec<GazeWindow>> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let bad = |msg: &str| Error::Schema {
        path: path.to_path_buf(),
        msg: msg.to_string(),
    };
    let mut cur = bytes.as_slice();
    let mut take = |n: usize| -> Result<&[u8]> {
        if cur.len() < n {
            return Err(bad("truncated window file"));
        }
        let (head, tail) = cur.split_at(n);
        cur = tail;
        Ok(head)
    };
    if take(4)? != STORE_MAGIC {
        return Err(bad("not a window file"));
    }
    let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
    if version != STORE_VERSION {
        return Err(bad("unsupported window file version"));
    }
    let count = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let id_len = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let id = String::from_utf8(take(id_len)?.to_vec()).map_err(|_| bad("participant id is not UTF-8"))?;
        let bins: [u8; 5] = take(5)?.try_into().unwrap();
        let profile = PersonalityProfile::new(bins)?;
        let raw = take(WINDOW_LEN * CHANNELS * 8)?;
        let frames = raw
            .chunks_exact(CHANNELS * 8)
            .map(|row| {
                let mut r = [0.0; CHANNELS];
                for (v, b) in r.iter_mut().zip(row.chunks_exact(8)) {
                    *v = f64::from_le_bytes(b.try_into().unwrap());
                }
                r
            })
            .collect();
        out.push(GazeWindow::new(frames, profile, mode, &id)?);
    }
    Ok(out)
}
