//! WebAssembly bindings for the in-browser what-if explorer. Every call takes
//! and returns the same JSON bodies as the HTTP service.

use vr_rating::api::{self, ApiError};
use vr_rating::OrdinalModel;
use wasm_bindgen::prelude::*;

#[wasm_bindgen]
pub struct Explorer {
    model: OrdinalModel,
}

impl Explorer {
    pub fn from_model_json(model_json: &str) -> Result<Self, ApiError> {
        let model = OrdinalModel::from_json(model_json).map_err(|e| ApiError::Malformed(e.to_string()))?;
        Ok(Self { model })
    }

    pub fn model(&self) -> &OrdinalModel {
        &self.model
    }

    pub fn schema_json(&self) -> Result<String, ApiError> {
        api::schema_json(&self.model)
    }

    pub fn rate_json(&self, body: &str) -> Result<String, ApiError> {
        api::rate_json(&self.model, body)
    }

    pub fn explain_json(&self, body: &str) -> Result<String, ApiError> {
        api::explain_json(&self.model, body)
    }

    pub fn suggest_json(&self, body: &str) -> Result<String, ApiError> {
        api::suggest_json(&self.model, body)
    }

    pub fn whatif_json(&self, body: &str) -> Result<String, ApiError> {
        api::whatif_json(&self.model, body)
    }
}

fn js(result: Result<String, ApiError>) -> Result<String, JsError> {
    result.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
impl Explorer {
    #[wasm_bindgen(constructor)]
    pub fn new(model_json: &str) -> Result<Explorer, JsError> {
        Explorer::from_model_json(model_json).map_err(|e| JsError::new(&e.to_string()))
    }

    pub fn schema(&self) -> Result<String, JsError> {
        js(self.schema_json())
    }

    pub fn rate(&self, body: &str) -> Result<String, JsError> {
        js(self.rate_json(body))
    }

    pub fn explain(&self, body: &str) -> Result<String, JsError> {
        js(self.explain_json(body))
    }

    pub fn suggest(&self, body: &str) -> Result<String, JsError> {
        js(self.suggest_json(body))
    }

    pub fn whatif(&self, body: &str) -> Result<String, JsError> {
        js(self.whatif_json(body))
    }
}
