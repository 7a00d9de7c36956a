//! Parsing of channel and protocol specifications from the command line.

use anyhow::{anyhow, bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qfid::channels::{build_zoo_channel, KrausChannel, ZooChannel};
use qfid::designs::StateDesign;
use qfid::estimators::{InputSource, Mode, ProtocolSpec, DEFAULT_HAAR_SETTINGS};

/// Parses `name` or `name:key=value,key=value` channel specifications, or a
/// path to a channel JSON file. Randomized zoo entries draw from a stream of
/// the run seed, so a (spec, seed) pair always denotes the same channel.
pub fn parse_channel(spec: &str, d: usize, seed: u64) -> Result<KrausChannel> {
    if spec.ends_with(".json") || spec.starts_with("file:") {
        let path = spec.strip_prefix("file:").unwrap_or(spec);
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading channel file {path}"))?;
        let channel = KrausChannel::from_json(&text)?;
        if channel.dim() != d * d {
            bail!(
                "channel file has dimension {}, expected D² = {}",
                channel.dim(),
                d * d
            );
        }
        return Ok(channel);
    }

    let (name, params) = match spec.split_once(':') {
        Some((n, p)) => (n, Some(p)),
        None => (spec, None),
    };
    let get = |key: &str| -> Result<f64> {
        let params = params.ok_or_else(|| anyhow!("channel `{name}` needs `{key}=...`"))?;
        for item in params.split(',') {
            if let Some((k, v)) = item.split_once('=') {
                if k == key {
                    return v
                        .parse::<f64>()
                        .with_context(|| format!("parsing {key}={v}"));
                }
            }
        }
        bail!("channel `{name}` needs `{key}=...`")
    };

    let kind = match name {
        "identity" => ZooChannel::Identity,
        "global-depolarizing" => ZooChannel::GlobalDepolarizing { p: get("p")? },
        "local-depolarizing" => ZooChannel::LocalDepolarizing {
            p_a: get("pa")?,
            p_b: get("pb")?,
        },
        "product-unitary" => ZooChannel::ProductUnitary,
        "random-unitary-mixture" => ZooChannel::RandomUnitaryMixture {
            k: get("k")? as usize,
        },
        "random-kraus" => ZooChannel::RandomKraus {
            rank: get("r")? as usize,
        },
        "pauli" => ZooChannel::PauliUnitary {
            label: params
                .ok_or_else(|| anyhow!("channel `pauli` needs a label, e.g. pauli:XX"))?
                .to_string(),
        },
        other => bail!("unknown channel `{other}`"),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0xC4A2);
    Ok(build_zoo_channel(&kind, d, &mut rng)?)
}

/// The estimation protocols exposed on the command line. `superop` is the
/// closed-form superoperator expectation rather than a sampling protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolName {
    DesignExact,
    DesignShots,
    Haar,
    HaarShots,
    TwirlHaar,
    TwirlHaarShots,
    TwirlClifford,
    TwirlCliffordShots,
    Superop,
}

impl ProtocolName {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "design-exact" => Self::DesignExact,
            "design-shots" => Self::DesignShots,
            "haar" => Self::Haar,
            "haar-shots" => Self::HaarShots,
            "twirl-haar" => Self::TwirlHaar,
            "twirl-haar-shots" => Self::TwirlHaarShots,
            "twirl-clifford" => Self::TwirlClifford,
            "twirl-clifford-shots" => Self::TwirlCliffordShots,
            "superop" => Self::Superop,
            other => bail!(
                "unknown protocol `{other}` (expected design-exact, design-shots, haar, \
                 haar-shots, twirl-haar, twirl-haar-shots, twirl-clifford, \
                 twirl-clifford-shots or superop)"
            ),
        })
    }
}

pub struct ProtocolOptions {
    pub design_kind: String,
    pub design_a: Option<String>,
    pub design_b: Option<String>,
    pub settings: Option<usize>,
    pub shots: u64,
    pub seed: u64,
}

fn load_design(path_or_kind: Option<&str>, kind: &str, d: usize) -> Result<StateDesign> {
    if let Some(path) = path_or_kind {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading design file {path}"))?;
        return Ok(StateDesign::from_json(&text)?);
    }
    Ok(match kind {
        "sic" => StateDesign::sic(d)?,
        "mub" => StateDesign::mub(d)?,
        other => bail!("unknown design kind `{other}` (expected sic or mub)"),
    })
}

/// Builds the library protocol description for a named protocol.
pub fn build_protocol(
    name: ProtocolName,
    d: usize,
    opts: &ProtocolOptions,
) -> Result<ProtocolSpec> {
    let design_pair = || -> Result<(StateDesign, StateDesign)> {
        let a = load_design(opts.design_a.as_deref(), &opts.design_kind, d)?;
        let b = load_design(opts.design_b.as_deref(), &opts.design_kind, d)?;
        Ok((a, b))
    };
    let settings = opts.settings.unwrap_or(DEFAULT_HAAR_SETTINGS);
    let sampled = |source: InputSource, mode: Mode| ProtocolSpec {
        mode,
        source,
        n_settings: settings,
        shots: opts.shots,
        seed: opts.seed,
    };
    Ok(match name {
        ProtocolName::DesignExact => {
            let (a, b) = design_pair()?;
            ProtocolSpec::design_exact(a, b)
        }
        ProtocolName::DesignShots => {
            let (a, b) = design_pair()?;
            ProtocolSpec::design_shots(a, b, opts.shots, opts.seed)
        }
        ProtocolName::Haar => sampled(InputSource::HaarProduct, Mode::Exact),
        ProtocolName::HaarShots => sampled(InputSource::HaarProduct, Mode::Shots),
        ProtocolName::TwirlHaar => sampled(InputSource::TwirlHaar, Mode::Exact),
        ProtocolName::TwirlHaarShots => sampled(InputSource::TwirlHaar, Mode::Shots),
        ProtocolName::TwirlClifford => ProtocolSpec::twirl_clifford(),
        ProtocolName::TwirlCliffordShots => ProtocolSpec {
            mode: Mode::Shots,
            source: InputSource::TwirlClifford,
            n_settings: 0,
            shots: opts.shots,
            seed: opts.seed,
        },
        ProtocolName::Superop => bail!("superop protocol has no sampling specification"),
    })
}

/// Inclusive `a..b` range used by the approximation sweep.
pub fn parse_m_range(text: &str, d: usize) -> Result<(usize, usize)> {
    let (lo, hi) = match text.split_once("..") {
        Some((a, b)) => (
            a.parse::<usize>().context("range start")?,
            b.parse::<usize>().context("range end")?,
        ),
        None => {
            let m = text.parse::<usize>().context("M value")?;
            (m, m)
        }
    };
    if lo < 2 || hi > d * d || lo > hi {
        bail!("M range {lo}..{hi} outside 2..{}", d * d);
    }
    Ok((lo, hi))
}
