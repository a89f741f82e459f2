//! Player, game and country attribute tables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureRecord, RawValue};

/// Device and usage attributes of one player. Column names follow the
/// player attribute table in snake_case; `cpu_family` is an extra column.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PlayerRecord {
    pub guid: String,
    pub avg_session_per_month: Option<f64>,
    pub avg_duration_per_session: Option<f64>,
    pub game_portion: Option<f64>,
    pub distinct_game_count: Option<f64>,
    pub windowed_mode: Option<String>,
    pub mode: Option<String>,
    pub country_name: Option<String>,
    pub device_age_category: Option<String>,
    pub chassis_type: Option<String>,
    pub model_vendor: Option<String>,
    pub os: Option<String>,
    /// GB
    pub ram: Option<f64>,
    /// nm
    pub cpu_process_node: Option<f64>,
    /// core count
    pub cpu_processor_number: Option<f64>,
    pub cpu_vendor: Option<String>,
    pub cpu_family: Option<String>,
    pub graphics_card_class: Option<String>,
    pub discrete_graphics: Option<bool>,
    pub graphics_manuf: Option<String>,
    pub vpro_enabled: Option<bool>,
    pub report_lifecycle_day: Option<f64>,
    /// inches
    pub screensize_category: Option<f64>,
    pub window_desktop_portion: Option<f64>,
}

/// Attributes of one game. Multi-valued columns (`genres`, `game_modes`,
/// `player_perspectives`, `themes`) are `|`-separated tag lists.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GameRecord {
    pub id: String,
    pub category: Option<String>,
    /// `YYYY-MM-DD`
    pub first_release_date: Option<String>,
    /// number of platforms
    pub platforms: Option<f64>,
    pub genres: Option<String>,
    pub game_modes: Option<String>,
    pub player_perspectives: Option<String>,
    pub themes: Option<String>,
    /// number of supported languages
    pub language_supports: Option<f64>,
    pub age_ratings: Option<String>,
    pub follows: Option<f64>,
    pub aggregated_rating: Option<f64>,
    pub aggregated_rating_count: Option<f64>,
    pub rating: Option<f64>,
    pub rating_count: Option<f64>,
    pub total_rating: Option<f64>,
    pub total_rating_count: Option<f64>,
    pub dlcs: Option<bool>,
    pub game_localizations: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryRecord {
    pub country: String,
    pub gdp_per_capita_usd: f64,
    pub gini: f64,
}

fn num(v: Option<f64>) -> RawValue {
    RawValue::Numeric(v)
}

fn cat(v: &Option<String>) -> RawValue {
    RawValue::Categorical(v.clone())
}

fn flag(v: Option<bool>) -> RawValue {
    RawValue::Categorical(v.map(|b| b.to_string()))
}

pub fn parse_tags(v: &Option<String>) -> Option<Vec<String>> {
    let s = v.as_deref()?;
    let tags: Vec<String> = s.split('|').map(str::trim).filter(|t| !t.is_empty()).map(String::from).collect();
    if tags.is_empty() {
        None
    } else {
        Some(tags)
    }
}

pub fn join_tags(tags: &[String]) -> String {
    tags.join("|")
}

fn check_non_negative(what: &str, id: &str, v: Option<f64>) -> Result<()> {
    match v {
        Some(x) if !(x >= 0.0 && x.is_finite()) => {
            Err(Error::InvalidInput(format!("{id}: {what} must be non-negative, got {x}")))
        }
        _ => Ok(()),
    }
}

impl PlayerRecord {
    pub fn validate(&self) -> Result<()> {
        if self.guid.is_empty() {
            return Err(Error::InvalidInput("player with empty guid".into()));
        }
        check_non_negative("ram", &self.guid, self.ram)?;
        check_non_negative("cpu_processor_number", &self.guid, self.cpu_processor_number)?;
        check_non_negative("cpu_process_node", &self.guid, self.cpu_process_node)?;
        check_non_negative("screensize_category", &self.guid, self.screensize_category)
    }

    /// Raw model features under the `player.` prefix. The guid is an
    /// identifier, not a feature.
    pub fn features(&self) -> FeatureRecord {
        let items = [
            ("avg_session_per_month", num(self.avg_session_per_month)),
            ("avg_duration_per_session", num(self.avg_duration_per_session)),
            ("game_portion", num(self.game_portion)),
            ("distinct_game_count", num(self.distinct_game_count)),
            ("windowed_mode", cat(&self.windowed_mode)),
            ("mode", cat(&self.mode)),
            ("country_name", cat(&self.country_name)),
            ("device_age_category", cat(&self.device_age_category)),
            ("chassis_type", cat(&self.chassis_type)),
            ("model_vendor", cat(&self.model_vendor)),
            ("os", cat(&self.os)),
            ("ram", num(self.ram)),
            ("cpu_process_node", num(self.cpu_process_node)),
            ("cpu_processor_number", num(self.cpu_processor_number)),
            ("cpu_vendor", cat(&self.cpu_vendor)),
            ("cpu_family", cat(&self.cpu_family)),
            ("graphics_card_class", cat(&self.graphics_card_class)),
            ("discrete_graphics", flag(self.discrete_graphics)),
            ("graphics_manuf", cat(&self.graphics_manuf)),
            ("vpro_enabled", flag(self.vpro_enabled)),
            ("report_lifecycle_day", num(self.report_lifecycle_day)),
            ("screensize_category", num(self.screensize_category)),
            ("window_desktop_portion", num(self.window_desktop_portion)),
        ];
        items.into_iter().map(|(k, v)| (format!("player.{k}"), v)).collect()
    }
}

/// Year and month from a `YYYY-MM[-DD]` date.
pub fn release_year_month(date: &str) -> (Option<f64>, Option<f64>) {
    let mut parts = date.trim().split('-');
    let year = parts.next().and_then(|y| y.parse::<u32>().ok()).filter(|y| (1950..=2100).contains(y));
    let month = parts.next().and_then(|m| m.parse::<u32>().ok()).filter(|m| (1..=12).contains(m));
    (year.map(f64::from), year.and(month).map(f64::from))
}

impl GameRecord {
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::InvalidInput("game with empty id".into()));
        }
        check_non_negative("platforms", &self.id, self.platforms)?;
        check_non_negative("language_supports", &self.id, self.language_supports)
    }

    pub fn release_year_month(&self) -> (Option<f64>, Option<f64>) {
        self.first_release_date.as_deref().map(release_year_month).unwrap_or((None, None))
    }

    /// Raw model features under the `game.` prefix.
    pub fn features(&self) -> FeatureRecord {
        let (year, month) = self.release_year_month();
        let items = [
            ("category", cat(&self.category)),
            ("release_year", num(year)),
            ("release_month", num(month)),
            ("platforms", num(self.platforms)),
            ("genres", RawValue::Tags(parse_tags(&self.genres))),
            ("game_modes", RawValue::Tags(parse_tags(&self.game_modes))),
            ("player_perspectives", RawValue::Tags(parse_tags(&self.player_perspectives))),
            ("themes", RawValue::Tags(parse_tags(&self.themes))),
            ("language_supports", num(self.language_supports)),
            ("age_ratings", cat(&self.age_ratings)),
            ("follows", num(self.follows)),
            ("aggregated_rating", num(self.aggregated_rating)),
            ("aggregated_rating_count", num(self.aggregated_rating_count)),
            ("rating", num(self.rating)),
            ("rating_count", num(self.rating_count)),
            ("total_rating", num(self.total_rating)),
            ("total_rating_count", num(self.total_rating_count)),
            ("dlcs", flag(self.dlcs)),
            ("game_localizations", num(self.game_localizations)),
        ];
        items.into_iter().map(|(k, v)| (format!("game.{k}"), v)).collect()
    }
}

impl CountryRecord {
    pub fn validate(&self) -> Result<()> {
        if !(self.gdp_per_capita_usd > 0.0 && self.gdp_per_capita_usd.is_finite()) {
            return Err(Error::InvalidInput(format!("{}: gdp_per_capita_usd must be positive", self.country)));
        }
        if !(0.0..=100.0).contains(&self.gini) {
            return Err(Error::InvalidInput(format!("{}: gini must be in [0,100]", self.country)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_parse() {
        assert_eq!(parse_tags(&Some("Action| Shooter".into())), Some(vec!["Action".into(), "Shooter".into()]));
        assert_eq!(parse_tags(&Some("".into())), None);
        assert_eq!(parse_tags(&None), None);
    }

    #[test]
    fn release_date_parts() {
        assert_eq!(release_year_month("2019-07-12"), (Some(2019.0), Some(7.0)));
        assert_eq!(release_year_month("2019"), (Some(2019.0), None));
        assert_eq!(release_year_month("garbage"), (None, None));
        assert_eq!(release_year_month("2019-13-01"), (Some(2019.0), None));
    }

    #[test]
    fn negative_ram_rejected() {
        let p = PlayerRecord { guid: "p".into(), ram: Some(-1.0), ..Default::default() };
        assert!(p.validate().is_err());
        let p = PlayerRecord { guid: "p".into(), ram: Some(16.0), ..Default::default() };
        assert!(p.validate().is_ok());
    }

    #[test]
    fn feature_names_are_prefixed() {
        let p = PlayerRecord { guid: "p".into(), discrete_graphics: Some(true), ..Default::default() };
        let f = p.features();
        assert!(f.keys().all(|k| k.starts_with("player.")));
        assert_eq!(f["player.discrete_graphics"], RawValue::Categorical(Some("true".into())));
        let g = GameRecord { id: "g".into(), first_release_date: Some("2020-02-01".into()), ..Default::default() };
        assert_eq!(g.features()["game.release_month"], RawValue::Numeric(Some(2.0)));
    }
}
