//! Resource limits shared by the solvers.

use crate::error::{Error, Result};

/// Upper bounds on the objects the solvers are willing to build.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Caps {
    /// Maximal number of states in any product or gadget game.
    pub max_product: usize,
    /// Maximal number of memoryless strategies enumerated for one player.
    pub max_strategies: usize,
    /// Optional override for the storage bound L.
    pub l_override: Option<u64>,
}

impl Default for Caps {
    fn default() -> Self {
        Caps { max_product: 4_000_000, max_strategies: 4096, l_override: None }
    }
}

impl Caps {
    /// Parses a list such as `product=100000,strategies=64,l=30`.
    pub fn parse(spec: &str) -> Result<Caps> {
        let mut caps = Caps::default();
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::Precondition(format!("cap entry `{item}` lacks `=`")))?;
            let n: u64 = value
                .trim()
                .parse()
                .map_err(|_| Error::Precondition(format!("cap value `{value}` is not a number")))?;
            if n == 0 {
                return Err(Error::Precondition(format!("cap `{key}` must be positive")));
            }
            match key.trim() {
                "product" => caps.max_product = n as usize,
                "strategies" => caps.max_strategies = n as usize,
                "l" => caps.l_override = Some(n),
                other => return Err(Error::Precondition(format!("unknown cap `{other}`"))),
            }
        }
        Ok(caps)
    }

    /// Reads `ENPAR_CAPS`, falling back to the defaults when it is unset.
    pub fn from_env() -> Result<Caps> {
        match std::env::var("ENPAR_CAPS") {
            Ok(spec) => Caps::parse(&spec),
            Err(_) => Ok(Caps::default()),
        }
    }

    pub(crate) fn check_product(&self, what: &'static str, size: usize) -> Result<()> {
        if size > self.max_product {
            return Err(Error::cap(what, size as u128, self.max_product as u128));
        }
        Ok(())
    }

    pub(crate) fn check_strategies(&self, count: u128) -> Result<()> {
        if count > self.max_strategies as u128 {
            return Err(Error::cap("strategy enumeration", count, self.max_strategies as u128));
        }
        Ok(())
    }
}
