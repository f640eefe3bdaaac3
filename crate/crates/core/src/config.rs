//! Run configuration: one flat key=value file (or the matching CLI flags)
//! fully determines a run, and every report embeds the resolved values so
//! results can be reproduced from the artifacts alone.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::controller::{ControllerMode, EncoderConfig};
use crate::error::{Error, Result};
use crate::yuv::VideoSpec;

/// Everything a run depends on besides the input bytes themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: PathBuf,
    pub width: usize,
    pub height: usize,
    pub fps: f64,
    /// Source frames to read; 0 means every frame the file holds.
    pub frames: usize,
    pub frame_skip: usize,
    pub mode: ControllerMode,
    /// Modes for side-by-side comparison runs.
    pub modes: Vec<ControllerMode>,
    pub bitrate: f64,
    pub buffer_ratio: f64,
    pub mu: f64,
    pub gop: Option<usize>,
    pub alpha: f64,
    pub lambda_adjust: bool,
    pub gmc: bool,
    pub gmv_search: u32,
    pub me_search: u32,
    pub th1: f64,
    pub th2: f64,
    pub model_window: usize,
    pub qp: u8,
    pub dump_regions: bool,
    pub dump_recon: bool,
    pub dump_models: bool,
    pub probe_frame: Option<usize>,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let enc = EncoderConfig::new(ControllerMode::RegionOrdered);
        RunConfig {
            input: PathBuf::new(),
            width: 176,
            height: 144,
            fps: 15.0,
            frames: 0,
            frame_skip: 0,
            mode: ControllerMode::RegionOrdered,
            modes: vec![
                ControllerMode::MbLayer,
                ControllerMode::FrameLayer,
                ControllerMode::RegionFree,
                ControllerMode::RegionOrdered,
            ],
            bitrate: enc.bitrate,
            buffer_ratio: enc.buffer_ratio,
            mu: enc.mu,
            gop: None,
            alpha: enc.alpha,
            lambda_adjust: enc.lambda_adjust,
            gmc: enc.gmc,
            gmv_search: enc.gmv_search,
            me_search: enc.me_search,
            th1: enc.th_moving,
            th2: enc.th_complex,
            model_window: enc.model_window,
            qp: enc.fixed_qp,
            dump_regions: false,
            dump_recon: false,
            dump_models: false,
            probe_frame: None,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn parse_as<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(format!("key {key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::config(format!("key {key}: expected a boolean, got {value:?}"))),
    }
}

fn parse_mode(key: &str, value: &str) -> Result<ControllerMode> {
    ControllerMode::parse(value).ok_or_else(|| {
        Error::config(format!(
            "key {key}: unknown mode {value:?} (expected mbl, fl, t1, t2, or cqp)"
        ))
    })
}

fn parse_optional(key: &str, value: &str) -> Result<Option<usize>> {
    if value == "none" {
        Ok(None)
    } else {
        parse_as::<usize>(key, value).map(Some)
    }
}

impl RunConfig {
    /// Apply one key=value pair; unknown keys are errors so typos surface.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "input" => self.input = PathBuf::from(value),
            "width" => self.width = parse_as(key, value)?,
            "height" => self.height = parse_as(key, value)?,
            "fps" => self.fps = parse_as(key, value)?,
            "frames" => self.frames = parse_as(key, value)?,
            "frame_skip" => self.frame_skip = parse_as(key, value)?,
            "mode" => self.mode = parse_mode(key, value)?,
            "modes" => {
                let mut modes = Vec::new();
                for part in value.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                    modes.push(parse_mode(key, part)?);
                }
                if modes.is_empty() {
                    return Err(Error::config("key modes: needs at least one mode"));
                }
                self.modes = modes;
            }
            "bitrate" => self.bitrate = parse_as(key, value)?,
            "buffer_ratio" => self.buffer_ratio = parse_as(key, value)?,
            "mu" => self.mu = parse_as(key, value)?,
            "gop" => self.gop = parse_optional(key, value)?,
            "alpha" => self.alpha = parse_as(key, value)?,
            "lambda_adjust" => self.lambda_adjust = parse_bool(key, value)?,
            "gmc" => self.gmc = parse_bool(key, value)?,
            "gmv_search" => self.gmv_search = parse_as(key, value)?,
            "me_search" => self.me_search = parse_as(key, value)?,
            "th1" => self.th1 = parse_as(key, value)?,
            "th2" => self.th2 = parse_as(key, value)?,
            "model_window" => self.model_window = parse_as(key, value)?,
            "qp" => self.qp = parse_as(key, value)?,
            "dump_regions" => self.dump_regions = parse_bool(key, value)?,
            "dump_recon" => self.dump_recon = parse_bool(key, value)?,
            "dump_models" => self.dump_models = parse_bool(key, value)?,
            "probe_frame" => self.probe_frame = parse_optional(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            _ => return Err(Error::config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Parse the flat `key = value` text format. `#` starts a comment and
    /// blank lines are ignored.
    pub fn from_str_cfg(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("line {}: expected key=value, got {raw:?}", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::from_str_cfg(&text)
    }

    /// Resolved key/value pairs in a fixed order: the audit trail embedded
    /// in summaries and round-trippable through [`RunConfig::from_str_cfg`].
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let opt = |v: Option<usize>| v.map_or_else(|| "none".to_string(), |n| n.to_string());
        vec![
            ("input", self.input.display().to_string()),
            ("width", self.width.to_string()),
            ("height", self.height.to_string()),
            ("fps", format!("{}", self.fps)),
            ("frames", self.frames.to_string()),
            ("frame_skip", self.frame_skip.to_string()),
            ("mode", self.mode.name().to_string()),
            (
                "modes",
                self.modes.iter().map(|m| m.name()).collect::<Vec<_>>().join(","),
            ),
            ("bitrate", format!("{}", self.bitrate)),
            ("buffer_ratio", format!("{}", self.buffer_ratio)),
            ("mu", format!("{}", self.mu)),
            ("gop", opt(self.gop)),
            ("alpha", format!("{}", self.alpha)),
            ("lambda_adjust", self.lambda_adjust.to_string()),
            ("gmc", self.gmc.to_string()),
            ("gmv_search", self.gmv_search.to_string()),
            ("me_search", self.me_search.to_string()),
            ("th1", format!("{}", self.th1)),
            ("th2", format!("{}", self.th2)),
            ("model_window", self.model_window.to_string()),
            ("qp", self.qp.to_string()),
            ("dump_regions", self.dump_regions.to_string()),
            ("dump_recon", self.dump_recon.to_string()),
            ("dump_models", self.dump_models.to_string()),
            ("probe_frame", opt(self.probe_frame)),
            ("out_dir", self.out_dir.display().to_string()),
        ]
    }

    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// Encoder settings for one controller mode of this run.
    pub fn encoder_config(&self, mode: ControllerMode) -> EncoderConfig {
        let mut enc = EncoderConfig::new(mode);
        enc.bitrate = self.bitrate;
        enc.buffer_ratio = self.buffer_ratio;
        enc.mu = self.mu;
        enc.alpha = self.alpha;
        enc.lambda_adjust = self.lambda_adjust;
        enc.gmc = self.gmc;
        enc.gmv_search = self.gmv_search;
        enc.me_search = self.me_search;
        enc.th_moving = self.th1;
        enc.th_complex = self.th2;
        enc.model_window = self.model_window;
        enc.gop = self.gop;
        enc.fixed_qp = self.qp;
        enc.frame_skip = self.frame_skip;
        enc
    }

    /// Video geometry for `source_frames` frames of the input.
    pub fn video_spec(&self, source_frames: usize) -> Result<VideoSpec> {
        VideoSpec::new(self.width, self.height, self.fps, source_frames)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input.as_os_str().is_empty() {
            return Err(Error::config("input path is required"));
        }
        if self.modes.is_empty() {
            return Err(Error::config("at least one mode is required"));
        }
        self.encoder_config(self.mode).validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_the_text_format() {
        let cfg = RunConfig::default();
        let text = cfg.to_config_string();
        let back = RunConfig::from_str_cfg(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn comments_blanks_and_spacing_are_tolerated() {
        let text = "
            # a comment
            width = 352   # trailing comment
            height=288
            mode = t1
            modes = fl , t2
            gop = 12
        ";
        let cfg = RunConfig::from_str_cfg(text).unwrap();
        assert_eq!(cfg.width, 352);
        assert_eq!(cfg.height, 288);
        assert_eq!(cfg.mode, ControllerMode::RegionFree);
        assert_eq!(cfg.modes, vec![ControllerMode::FrameLayer, ControllerMode::RegionOrdered]);
        assert_eq!(cfg.gop, Some(12));
    }

    #[test]
    fn unknown_keys_and_bad_values_name_the_offender() {
        let err = RunConfig::from_str_cfg("wibble = 3").unwrap_err();
        assert!(err.to_string().contains("wibble"), "{err}");
        let err = RunConfig::from_str_cfg("bitrate = fast").unwrap_err();
        assert!(err.to_string().contains("bitrate") && err.to_string().contains("fast"), "{err}");
        let err = RunConfig::from_str_cfg("mode = t9").unwrap_err();
        assert!(err.to_string().contains("t9"), "{err}");
        let err = RunConfig::from_str_cfg("just a line").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
    }

    #[test]
    fn gop_and_probe_frame_accept_none() {
        let cfg = RunConfig::from_str_cfg("gop = none\nprobe_frame = 7").unwrap();
        assert_eq!(cfg.gop, None);
        assert_eq!(cfg.probe_frame, Some(7));
    }

    #[test]
    fn validation_requires_an_input_path() {
        let cfg = RunConfig::default();
        assert!(cfg.validate().is_err());
        let mut ok = RunConfig::default();
        ok.set("input", "clip.yuv").unwrap();
        assert!(ok.validate().is_ok());
    }

    #[test]
    fn encoder_config_inherits_every_shared_knob() {
        let mut cfg = RunConfig::default();
        cfg.set("bitrate", "48000").unwrap();
        cfg.set("mu", "0.25").unwrap();
        cfg.set("th1", "0.9").unwrap();
        cfg.set("lambda_adjust", "false").unwrap();
        cfg.set("frame_skip", "2").unwrap();
        let enc = cfg.encoder_config(ControllerMode::RegionFree);
        assert_eq!(enc.mode, ControllerMode::RegionFree);
        assert_eq!(enc.bitrate, 48000.0);
        assert_eq!(enc.mu, 0.25);
        assert_eq!(enc.th_moving, 0.9);
        assert!(!enc.lambda_adjust);
        assert_eq!(enc.frame_skip, 2);
    }
}
