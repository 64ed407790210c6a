//! Effective configuration: defaults, then the config file, then flags.

use std::path::PathBuf;

use a4d_core::GlobalConfig;

use crate::args::{AgentKind, GlobalArgs};
use crate::exit::CliError;

#[derive(Debug, Clone)]
pub struct Settings {
    pub config: GlobalConfig,
    pub cache_dir: Option<PathBuf>,
    pub agent: AgentKind,
    pub transcript: Option<PathBuf>,
}

pub fn resolve(args: &GlobalArgs) -> Result<Settings, CliError> {
    let mut config = match &args.config {
        Some(path) => {
            if !path.is_file() {
                return Err(CliError::usage(format!("config file {} not found", path.display())));
            }
            GlobalConfig::load(path)?
        }
        None => GlobalConfig::default(),
    };
    apply_overrides(&mut config, args);
    if let Ok(endpoint) = std::env::var("A4D_ENDPOINT") {
        if !endpoint.is_empty() {
            config.agent.endpoint_url = endpoint;
        }
    }
    // validates the merged view (ranges, backend names)
    config.refinement_config()?;

    let agent = args.agent.unwrap_or(if args.transcript.is_some() {
        AgentKind::Mock
    } else {
        AgentKind::Http
    });
    if args.transcript.is_some() && agent != AgentKind::Mock {
        return Err(CliError::usage("--transcript only applies to --agent mock"));
    }
    let cache_dir = if args.no_cache {
        None
    } else {
        Some(args.cache_dir.clone().unwrap_or_else(|| config.paths.cache_dir.clone()))
    };
    Ok(Settings {
        config,
        cache_dir,
        agent,
        transcript: args.transcript.clone(),
    })
}

fn apply_overrides(config: &mut GlobalConfig, args: &GlobalArgs) {
    if let Some(backend) = &args.backend {
        config.refinement.backend = backend.clone();
    }
    if let Some(n) = args.max_iters {
        config.refinement.max_iterations = n;
    }
    if let Some(w) = args.workers {
        config.refinement.workers = w;
    }
    if args.strict {
        config.toolchain.strict = true;
    }
    if let Some(t) = args.timeout_s {
        config.limits.wall_clock_s = t;
    }
    if let Some(m) = args.mem_mb {
        config.limits.memory_mb = m;
    }
    if let Some(dir) = &args.cache_dir {
        config.paths.cache_dir = dir.clone();
    }
    if args.dry_run {
        config.refinement.dry_run = true;
    }
}

impl Settings {
    /// The configuration as printed at the start of a run.
    pub fn describe(&self) -> String {
        let mut out = String::from("# effective configuration\n");
        out.push_str(&self.config.redacted());
        out.push_str(&format!(
            "# agent = {:?}, cache = {}\n",
            self.agent,
            self.cache_dir
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_else(|| "off".into())
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exit::USAGE;

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a4d.toml");
        std::fs::write(&path, "[refinement]\nmax_iterations = 2\nworkers = 3\n[limits]\nmemory_mb = 64\n").unwrap();
        let args = GlobalArgs {
            config: Some(path),
            max_iters: Some(6),
            timeout_s: Some(4),
            ..GlobalArgs::default()
        };
        let s = resolve(&args).unwrap();
        assert_eq!(s.config.refinement.max_iterations, 6);
        assert_eq!(s.config.refinement.workers, 3);
        assert_eq!(s.config.limits.memory_mb, 64);
        assert_eq!(s.config.limits.wall_clock_s, 4);
    }

    #[test]
    fn invalid_values_are_usage_errors() {
        let args = GlobalArgs {
            max_iters: Some(9),
            ..GlobalArgs::default()
        };
        assert_eq!(resolve(&args).unwrap_err().code, USAGE);
        let args = GlobalArgs {
            backend: Some("ida".into()),
            ..GlobalArgs::default()
        };
        assert_eq!(resolve(&args).unwrap_err().code, USAGE);
    }

    #[test]
    fn transcript_implies_mock() {
        let args = GlobalArgs {
            transcript: Some("t.json".into()),
            ..GlobalArgs::default()
        };
        assert_eq!(resolve(&args).unwrap().agent, AgentKind::Mock);
        let args = GlobalArgs {
            transcript: Some("t.json".into()),
            agent: Some(AgentKind::Http),
            ..GlobalArgs::default()
        };
        assert_eq!(resolve(&args).unwrap_err().code, USAGE);
    }
}
