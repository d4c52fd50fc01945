use std::time::Duration;

use reviewboard_core::ingest::{PaperProbe, ProbeStatus};

/// Checks paper URLs with a HEAD request, retrying as GET when the host
/// refuses HEAD.
pub struct HttpProbe {
    client: reqwest::blocking::Client,
}

impl HttpProbe {
    pub fn new(timeout: Duration) -> Result<Self, reqwest::Error> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .user_agent(concat!("reviewboard/", env!("CARGO_PKG_VERSION")))
            .build()?;
        Ok(Self { client })
    }
}

impl PaperProbe for HttpProbe {
    fn probe(&self, url: &str) -> ProbeStatus {
        let status = |r: reqwest::Result<reqwest::blocking::Response>| match r {
            Ok(resp) => ProbeStatus::Status(resp.status().as_u16()),
            Err(e) => ProbeStatus::Failed(e.to_string()),
        };
        match status(self.client.head(url).send()) {
            ProbeStatus::Status(405 | 501) => status(self.client.get(url).send()),
            other => other,
        }
    }
}
