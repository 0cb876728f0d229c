use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    ConditionTags, CorpusError, FaceVisibility, Manifest, MediaKey, Platform, RangeBand,
    RecordMeta, Result,
};

#[derive(Deserialize)]
struct RawLine {
    identity_id: String,
    media_id: String,
    #[serde(default)]
    clip_id: Option<String>,
    #[serde(default)]
    frame_index: Option<u64>,
    #[serde(default)]
    clothing_set_id: Option<String>,
    #[serde(default)]
    face_visibility: Option<String>,
    #[serde(default)]
    range_band: Option<String>,
    #[serde(default)]
    platform: Option<String>,
}

#[derive(Serialize)]
struct OutLine<'a> {
    identity_id: &'a str,
    media_id: &'a str,
    clip_id: Option<&'a str>,
    frame_index: Option<u64>,
    clothing_set_id: &'a str,
    face_visibility: &'static str,
    range_band: &'static str,
    platform: &'static str,
}

fn parse_tag<T: std::str::FromStr<Err = String> + Default>(
    line: usize,
    field: &'static str,
    value: Option<String>,
) -> Result<T> {
    match value {
        None => Ok(T::default()),
        Some(v) => v
            .parse()
            .map_err(|value| CorpusError::UnknownEnum { line, field, value }),
    }
}

/// Parses manifest text. Line numbers in errors are 1-based; blank lines are skipped.
pub fn parse_manifest(text: &str) -> Result<Manifest> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let parsed: RawLine =
            serde_json::from_str(raw).map_err(|e| CorpusError::MalformedLine {
                line,
                message: e.to_string(),
            })?;
        let key = MediaKey {
            identity_id: parsed.identity_id,
            media_id: parsed.media_id,
            clip_id: parsed.clip_id,
            frame_index: parsed.frame_index,
        };
        let tags = ConditionTags {
            clothing_set_id: parsed.clothing_set_id.unwrap_or_default(),
            face_visibility: parse_tag::<FaceVisibility>(
                line,
                FaceVisibility::FIELD,
                parsed.face_visibility,
            )?,
            range_band: parse_tag::<RangeBand>(line, RangeBand::FIELD, parsed.range_band)?,
            platform: parse_tag::<Platform>(line, Platform::FIELD, parsed.platform)?,
        };
        if !seen.insert(key.clone()) {
            return Err(CorpusError::DuplicateKey {
                line,
                key: key.to_string(),
            });
        }
        records.push(RecordMeta { key, tags });
    }
    Ok(Manifest { records })
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_manifest(&text)
}

pub fn write_manifest<W: Write>(manifest: &Manifest, mut out: W) -> std::io::Result<()> {
    for r in &manifest.records {
        let line = OutLine {
            identity_id: &r.key.identity_id,
            media_id: &r.key.media_id,
            clip_id: r.key.clip_id.as_deref(),
            frame_index: r.key.frame_index,
            clothing_set_id: &r.tags.clothing_set_id,
            face_visibility: r.tags.face_visibility.as_str(),
            range_band: r.tags.range_band.as_str(),
            platform: r.tags.platform.as_str(),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_manifest(manifest: &Manifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = fs::File::create(path).map_err(io_err)?;
    let mut w = std::io::BufWriter::new(file);
    write_manifest(manifest, &mut w).map_err(io_err)?;
    w.flush().map_err(io_err)
}
