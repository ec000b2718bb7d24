//! Text format for stream sets.
//!
//! ```text
//! streamforge-streams v1 count=<n>
//! g1[0] g1[1] g1[2] g2[0] g2[1] g2[2] init_g1[0] .. init_g2[2]
//! ...
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{State, StreamSet, StreamState};
use crate::error::{Error, Result};

pub const FILE_MAGIC: &str = "streamforge-streams v1";

pub fn write_streams<W: Write>(set: &StreamSet, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{FILE_MAGIC} count={}", set.count())?;
    for s in set.iter() {
        let c = s.current().to_array();
        let i = s.initial().to_array();
        let fields: Vec<String> = c.iter().chain(i.iter()).map(u32::to_string).collect();
        writeln!(w, "{}", fields.join(" "))?;
    }
    w.flush()
}

pub fn read_streams<R: BufRead>(r: R) -> Result<StreamSet> {
    let corrupt = |msg: String| Error::CorruptStreamFile(msg);
    let mut lines = r.lines();
    let header = match lines.next() {
        Some(line) => line.map_err(|e| corrupt(e.to_string()))?,
        None => return Err(corrupt("empty file".into())),
    };
    let count = header
        .strip_prefix(FILE_MAGIC)
        .and_then(|rest| rest.strip_prefix(" count="))
        .and_then(|n| n.parse::<usize>().ok())
        .ok_or_else(|| corrupt(format!("bad header {header:?}")))?;
    if count == 0 {
        return Err(corrupt("count must be at least 1".into()));
    }

    let mut streams = Vec::with_capacity(count);
    for (idx, line) in lines.enumerate() {
        let line = line.map_err(|e| corrupt(e.to_string()))?;
        if line.is_empty() && idx >= count {
            continue;
        }
        if idx >= count {
            return Err(corrupt(format!("more than {count} stream lines")));
        }
        let lineno = idx + 2;
        let values: Vec<u32> = line
            .split(' ')
            .map(|f| f.parse::<u32>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| corrupt(format!("line {lineno}: {e}")))?;
        if values.len() != 12 {
            return Err(corrupt(format!("line {lineno}: expected 12 integers, found {}", values.len())));
        }
        let state = |v: &[u32]| {
            State::new(v.try_into().expect("six values")).map_err(|e| corrupt(format!("line {lineno}: {e}")))
        };
        streams.push(StreamState::from_parts(state(&values[..6])?, state(&values[6..])?));
    }
    if streams.len() != count {
        return Err(corrupt(format!("header declares {count} streams, found {}", streams.len())));
    }
    StreamSet::from_streams(streams)
}

/// Writes `set` to `path` through a temporary file in the same directory and a rename.
pub fn save_streams(set: &StreamSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    write_streams(set, BufWriter::new(tmp.as_file())).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn load_streams(path: impl AsRef<Path>) -> Result<StreamSet> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_streams(BufReader::new(f))
}
