use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("no data")]
    NoData,
    #[error("{0}")]
    BadRequest(String),
    #[error(transparent)]
    Engine(#[from] fdastream_core::Error),
    #[error("internal error: {0}")]
    Internal(String),
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        use fdastream_core::Error as E;
        match self {
            ApiError::NoData => StatusCode::NOT_FOUND,
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
            ApiError::Engine(e) => match e {
                E::UnknownSeries(_) => StatusCode::NOT_FOUND,
                E::InvalidOperation(_) | E::Singular(_) => StatusCode::UNPROCESSABLE_ENTITY,
                E::DuplicateSeries(_) => StatusCode::CONFLICT,
                E::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
                _ => StatusCode::BAD_REQUEST,
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.to_string() });
        if let ApiError::Engine(fdastream_core::Error::UnknownSeries(ids)) = &self {
            body["unknown_ids"] = json!(ids);
        }
        (self.status(), Json(body)).into_response()
    }
}

pub type ApiResult<T> = std::result::Result<T, ApiError>;
