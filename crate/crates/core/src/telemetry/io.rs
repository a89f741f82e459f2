//! File formats: `sessions.jsonl`, `players.csv`, `games.csv`,
//! `countries.csv`.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::records::{CountryRecord, GameRecord, PlayerRecord};
use super::session::SessionRecord;
use crate::error::{Error, Result};

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line)
            .map_err(|e| Error::parse(format!("{}:{}", path.display(), lineno + 1), e))?;
        out.push(item);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| Error::parse(path.display().to_string(), e))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::parse(path.display().to_string(), e))?;
    reader
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::parse(format!("{} row {}", path.display(), i + 1), e)))
        .collect()
}

pub fn write_csv<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path.display().to_string(), e))?;
    for item in items {
        w.serialize(item).map_err(|e| Error::parse(path.display().to_string(), e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn check_unique<'a>(what: &str, ids: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::InvalidInput(format!("duplicate {what} id {id}")));
        }
    }
    Ok(())
}

pub fn read_sessions(path: &Path) -> Result<Vec<SessionRecord>> {
    let sessions: Vec<SessionRecord> = read_jsonl(path)?;
    for s in &sessions {
        s.validate()?;
    }
    Ok(sessions)
}

pub fn read_players(path: &Path) -> Result<Vec<PlayerRecord>> {
    let players: Vec<PlayerRecord> = read_csv(path)?;
    check_unique("player", players.iter().map(|p| p.guid.as_str()))?;
    for p in &players {
        p.validate()?;
    }
    Ok(players)
}

pub fn read_games(path: &Path) -> Result<Vec<GameRecord>> {
    let games: Vec<GameRecord> = read_csv(path)?;
    check_unique("game", games.iter().map(|g| g.id.as_str()))?;
    for g in &games {
        g.validate()?;
    }
    Ok(games)
}

pub fn read_countries(path: &Path) -> Result<Vec<CountryRecord>> {
    let countries: Vec<CountryRecord> = read_csv(path)?;
    check_unique("country", countries.iter().map(|c| c.country.as_str()))?;
    for c in &countries {
        c.validate()?;
    }
    Ok(countries)
}
