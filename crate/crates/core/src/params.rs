use core::fmt;

use serde::{Deserialize, Serialize};

/// Decoding parameters forwarded to a transpiler backend.
///
/// `num_beams` and `max_new_tokens` bound the decoder's work, which grows as
/// beams times the square of the generated length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub num_beams: u32,
    pub max_new_tokens: u32,
    #[serde(default)]
    pub sampling_enabled: bool,
    #[serde(default = "default_context_window")]
    pub context_window: u32,
}

fn default_context_window() -> u32 {
    GenerationParams::DEFAULT_CONTEXT_WINDOW
}

impl GenerationParams {
    pub const DEFAULT_CONTEXT_WINDOW: u32 = 16_384;

    pub fn validate(&self) -> Result<(), ParamError> {
        if self.num_beams == 0 {
            return Err(ParamError("num_beams"));
        }
        if self.max_new_tokens == 0 {
            return Err(ParamError("max_new_tokens"));
        }
        if self.context_window == 0 {
            return Err(ParamError("context_window"));
        }
        Ok(())
    }

    pub fn with_beams(mut self, beams: u32) -> Self {
        self.num_beams = beams;
        self
    }
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            num_beams: 1,
            max_new_tokens: 4096,
            sampling_enabled: false,
            context_window: Self::DEFAULT_CONTEXT_WINDOW,
        }
    }
}

/// Names the parameter that must be strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamError(pub &'static str);

impl fmt::Display for ParamError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "generation parameter `{}` must be positive", self.0)
    }
}

impl core::error::Error for ParamError {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_deterministic() {
        let p = GenerationParams::default();
        assert!(!p.sampling_enabled);
        assert_eq!(p.context_window, 16_384);
        assert!(p.validate().is_ok());
    }

    #[test]
    fn zero_beams_rejected() {
        let p = GenerationParams::default().with_beams(0);
        assert_eq!(p.validate(), Err(ParamError("num_beams")));
    }
}
