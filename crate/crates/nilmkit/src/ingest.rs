//! File formats: measurement corpora, signature databases, and model files.
//!
//! ## Corpora
//!
//! A corpus is a directory with a `header.toml` describing the recording and
//! one file per channel (`channel_01.txt`, ...). Text channels hold one
//! sample per line; binary channels (`.f32`) hold a magic string, a little-
//! endian sample count, and packed `f32` samples. The header names the
//! voltage and aggregate current channels; reading the pair resamples onto
//! a power-of-two cycle grid when the native rate needs it.
//!
//! ## Signature databases and model files
//!
//! Both are JSON-lines files whose first line is a format/version header,
//! so a file written by a different toolkit generation fails fast with a
//! schema error instead of garbled data. Floats are serialized in shortest
//! round-trip form, which reproduces every bit on load. Writers take a
//! `.lock` companion file exclusively and remove it afterwards; a second
//! concurrent writer fails immediately instead of interleaving lines.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{DeltaSignature, Polarity};
use crate::features::FeatureSpace;
use crate::learn::{Algorithm, Model, Normalizer};
use crate::signal::{CyclePair, Waveform};
use crate::simulate::{Scenario, TruthEvent};

/// Magic prefix of binary channel files.
const F32_MAGIC: &[u8; 8] = b"NILMF32\0";
/// Signature database format tag and supported version.
const SIGDB_FORMAT: &str = "nilm-sigdb";
pub const SIGDB_VERSION: u32 = 1;
/// Model file format tag and supported version.
const MODEL_FORMAT: &str = "nilm-model";
pub const MODEL_VERSION: u32 = 1;

// ---------------------------------------------------------------------------
// Corpus headers
// ---------------------------------------------------------------------------

/// On-disk sample encoding of a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleFormat {
    Text,
    F32,
}

/// One named channel of a corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelDef {
    pub id: u32,
    pub name: String,
}

/// The `header.toml` of a corpus directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusHeader {
    pub sample_rate: f64,
    pub mains_freq: f64,
    pub format: SampleFormat,
    /// Channel carrying the mains voltage.
    pub voltage_channel: u32,
    /// Channel carrying the aggregate current.
    pub current_channel: u32,
    /// Channels measured at the service entry.
    pub mains: Vec<u32>,
    #[serde(rename = "channel", default)]
    pub channels: Vec<ChannelDef>,
}

impl CorpusHeader {
    pub fn channel_name(&self, id: u32) -> Option<&str> {
        self.channels.iter().find(|c| c.id == id).map(|c| c.name.as_str())
    }

    fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0) || !(self.mains_freq > 0.0) {
            return Err(Error::Config(format!(
                "corpus rates must be positive: sample_rate {}, mains_freq {}",
                self.sample_rate, self.mains_freq
            )));
        }
        for id in [self.voltage_channel, self.current_channel] {
            if self.channel_name(id).is_none() {
                return Err(Error::Config(format!("corpus header references undeclared channel {id}")));
            }
        }
        let mut ids: Vec<u32> = self.channels.iter().map(|c| c.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.channels.len() {
            return Err(Error::Config("corpus header declares duplicate channel ids".into()));
        }
        Ok(())
    }
}

fn channel_path(dir: &Path, header: &CorpusHeader, id: u32) -> PathBuf {
    let ext = match header.format {
        SampleFormat::Text => "txt",
        SampleFormat::F32 => "f32",
    };
    dir.join(format!("channel_{id:02}.{ext}"))
}

/// Reads and validates `header.toml`.
pub fn read_corpus_header(dir: &Path) -> Result<CorpusHeader> {
    let path = dir.join("header.toml");
    if !path.exists() {
        return Err(Error::CorpusMissingHeader(dir.to_path_buf()));
    }
    let text = fs::read_to_string(&path)?;
    let header: CorpusHeader = toml::from_str(&text).map_err(|e| Error::Parse {
        file: path.clone(),
        line: e.span().map_or(0, |s| text[..s.start].lines().count().max(1)),
        details: e.message().to_string(),
    })?;
    header.validate()?;
    Ok(header)
}

/// Writes a corpus: the header plus one file per `(id, samples)` entry.
pub fn write_corpus(dir: &Path, header: &CorpusHeader, channels: &[(u32, &[f64])]) -> Result<()> {
    header.validate()?;
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join("header.toml"),
        toml::to_string_pretty(header).map_err(|e| Error::Config(format!("unencodable header: {e}")))?,
    )?;
    for (id, samples) in channels {
        if header.channel_name(*id).is_none() {
            return Err(Error::Config(format!("cannot write undeclared channel {id}")));
        }
        let path = channel_path(dir, header, *id);
        match header.format {
            SampleFormat::Text => {
                let mut w = BufWriter::new(fs::File::create(&path)?);
                for s in *samples {
                    writeln!(w, "{s}")?;
                }
                w.flush()?;
            }
            SampleFormat::F32 => {
                let mut w = BufWriter::new(fs::File::create(&path)?);
                w.write_all(F32_MAGIC)?;
                w.write_all(&(samples.len() as u64).to_le_bytes())?;
                for s in *samples {
                    w.write_all(&(*s as f32).to_le_bytes())?;
                }
                w.flush()?;
            }
        }
    }
    Ok(())
}

/// Reads one channel's samples.
pub fn read_channel(dir: &Path, header: &CorpusHeader, id: u32) -> Result<Vec<f64>> {
    if header.channel_name(id).is_none() {
        return Err(Error::Config(format!("corpus has no channel {id}")));
    }
    let path = channel_path(dir, header, id);
    match header.format {
        SampleFormat::Text => {
            let reader = BufReader::new(fs::File::open(&path)?);
            let mut samples = Vec::new();
            for (lineno, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let v: f64 = line.trim().parse().map_err(|e| Error::Parse {
                    file: path.clone(),
                    line: lineno + 1,
                    details: format!("bad sample: {e}"),
                })?;
                samples.push(v);
            }
            Ok(samples)
        }
        SampleFormat::F32 => {
            let mut r = BufReader::new(fs::File::open(&path)?);
            let mut magic = [0u8; 8];
            r.read_exact(&mut magic)?;
            if &magic != F32_MAGIC {
                return Err(Error::MalformedSignal(format!("{} lacks the binary channel magic", path.display())));
            }
            let mut count_bytes = [0u8; 8];
            r.read_exact(&mut count_bytes)?;
            let count = u64::from_le_bytes(count_bytes) as usize;
            let mut payload = Vec::new();
            r.read_to_end(&mut payload)?;
            if payload.len() != count * 4 {
                return Err(Error::MalformedSignal(format!(
                    "{} declares {count} samples but holds {} payload bytes",
                    path.display(),
                    payload.len()
                )));
            }
            Ok(payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect())
        }
    }
}

/// Reads the voltage/current pair named by the header, resampling both onto
/// a power-of-two cycle grid when the native rate is not one already.
pub fn read_waveform_pair(dir: &Path) -> Result<(Waveform, Waveform)> {
    let header = read_corpus_header(dir)?;
    let v = read_channel(dir, &header, header.voltage_channel)?;
    let i = read_channel(dir, &header, header.current_channel)?;
    if v.len() != i.len() {
        return Err(Error::CorpusInconsistentLength {
            channel: header.current_channel,
            got: i.len(),
            expected: v.len(),
        });
    }
    match Waveform::new(v.clone(), header.sample_rate, header.mains_freq) {
        Ok(wv) => Ok((wv, Waveform::new(i, header.sample_rate, header.mains_freq)?)),
        // Native rate is not a power-of-two cycle grid; interpolate both.
        Err(Error::Size { .. }) => Ok((
            Waveform::resampled(&v, header.sample_rate, header.mains_freq)?,
            Waveform::resampled(&i, header.sample_rate, header.mains_freq)?,
        )),
        Err(e) => Err(e),
    }
}

// ---------------------------------------------------------------------------
// Versioned JSON-lines files
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct FileHeader {
    format: String,
    version: u32,
}

/// Exclusive `.lock` companion; created on acquire, removed on drop. A
/// second writer fails fast instead of corrupting the target.
struct LockFile {
    path: PathBuf,
}

impl LockFile {
    fn acquire(target: &Path) -> Result<Self> {
        let mut os = target.as_os_str().to_os_string();
        os.push(".lock");
        let path = PathBuf::from(os);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(LockFile { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(Error::ConcurrentWrite(target.to_path_buf()))
            }
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for LockFile {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn write_versioned(path: &Path, format: &str, version: u32, lines: &[String]) -> Result<()> {
    let _lock = LockFile::acquire(path)?;
    let mut w = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer(&mut w, &FileHeader { format: format.into(), version })?;
    writeln!(w)?;
    for line in lines {
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

fn read_versioned(path: &Path, format: &'static str, supported: u32) -> Result<Vec<String>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut lines = reader.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::MalformedSignal(format!("{} is empty", path.display())))??;
    let header: FileHeader = serde_json::from_str(&first).map_err(|e| Error::Parse {
        file: path.to_path_buf(),
        line: 1,
        details: format!("bad file header: {e}"),
    })?;
    if header.format != format {
        return Err(Error::Parse {
            file: path.to_path_buf(),
            line: 1,
            details: format!("this is a {:?} file, expected {format:?}", header.format),
        });
    }
    if header.version != supported {
        return Err(Error::SchemaVersion { kind: format, got: header.version, supported });
    }
    let mut out = Vec::new();
    for line in lines {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(line);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Signature databases
// ---------------------------------------------------------------------------

/// One stored delta signature, optionally labeled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignatureRecord {
    pub event_index: usize,
    pub polarity: Polarity,
    pub p_delta: f64,
    pub mains_freq: f64,
    pub v: Vec<f64>,
    pub i: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u32>,
}

impl SignatureRecord {
    pub fn from_delta(sig: &DeltaSignature, label: Option<u32>) -> Self {
        SignatureRecord {
            event_index: sig.event_index,
            polarity: sig.polarity,
            p_delta: sig.p_delta,
            mains_freq: sig.cycle.mains_freq(),
            v: sig.cycle.v().to_vec(),
            i: sig.cycle.i().to_vec(),
            label,
        }
    }

    pub fn to_delta(&self) -> Result<DeltaSignature> {
        Ok(DeltaSignature {
            cycle: CyclePair::new(self.v.clone(), self.i.clone(), self.mains_freq)?,
            event_index: self.event_index,
            polarity: self.polarity,
            p_delta: self.p_delta,
        })
    }
}

/// Writes a signature database. Floats keep full precision, and the write
/// is guarded by a lock file.
pub fn save_signatures(path: &Path, records: &[SignatureRecord]) -> Result<()> {
    let lines: Vec<String> = records
        .iter()
        .map(|r| serde_json::to_string(r).map_err(Error::from))
        .collect::<Result<_>>()?;
    write_versioned(path, SIGDB_FORMAT, SIGDB_VERSION, &lines)
}

/// Loads a signature database, checking the format header first.
pub fn load_signatures(path: &Path) -> Result<Vec<SignatureRecord>> {
    read_versioned(path, SIGDB_FORMAT, SIGDB_VERSION)?
        .iter()
        .enumerate()
        .map(|(idx, line)| {
            serde_json::from_str(line).map_err(|e| Error::Parse {
                file: path.to_path_buf(),
                line: idx + 2,
                details: format!("bad signature record: {e}"),
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Model files
// ---------------------------------------------------------------------------

/// A trained classifier with everything needed to apply it: the feature
/// space, the fitted normalizer, and the algorithm it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub space: FeatureSpace,
    pub algorithm: Algorithm,
    pub normalizer: Normalizer,
    pub model: Model,
}

pub fn save_model(path: &Path, file: &ModelFile) -> Result<()> {
    let line = serde_json::to_string(file)?;
    write_versioned(path, MODEL_FORMAT, MODEL_VERSION, &[line])
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let lines = read_versioned(path, MODEL_FORMAT, MODEL_VERSION)?;
    let line = lines
        .first()
        .ok_or_else(|| Error::MalformedSignal(format!("{} has no model record", path.display())))?;
    serde_json::from_str(line).map_err(|e| Error::Parse {
        file: path.to_path_buf(),
        line: 2,
        details: format!("bad model record: {e}"),
    })
}

// ---------------------------------------------------------------------------
// Truth logs
// ---------------------------------------------------------------------------

/// Reads an appliance toggle log written by the simulator.
pub fn read_truth_log(path: &Path) -> Result<Vec<TruthEvent>> {
    let text = fs::read_to_string(path)?;
    Scenario::parse_truth_csv(&text).map_err(|e| match e {
        Error::Parse { line, details, .. } => Error::Parse { file: path.to_path_buf(), line, details },
        other => other,
    })
}

/// Writes an appliance toggle log.
pub fn write_truth_log(path: &Path, events: &[TruthEvent]) -> Result<()> {
    let mut out = String::from("cycle,appliance,name,polarity\n");
    for t in events {
        out.push_str(&format!(
            "{},{},{},{}\n",
            t.cycle,
            t.appliance,
            t.name,
            if t.on { "on" } else { "off" }
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
