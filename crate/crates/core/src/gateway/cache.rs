use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{BackendReply, ChatRequest, FinishReason};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedResponse {
    pub text: String,
    pub finish_reason: FinishReason,
    pub latency_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CacheRecord {
    request_hash: String,
    request: ChatRequest,
    response: CachedResponse,
}

/// Content-addressed response store: `<dir>/<request_hash>.json`, one file
/// per request holding both the request and the response. Entries are never
/// evicted.
#[derive(Debug)]
pub struct ResponseCache {
    dir: PathBuf,
    write_lock: Mutex<()>,
}

impl ResponseCache {
    pub fn open(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(ResponseCache {
            dir,
            write_lock: Mutex::new(()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, hash: &str) -> PathBuf {
        self.dir.join(format!("{hash}.json"))
    }

    pub fn get(&self, hash: &str) -> Option<CachedResponse> {
        let bytes = fs::read(self.path(hash)).ok()?;
        match serde_json::from_slice::<CacheRecord>(&bytes) {
            Ok(rec) if rec.request_hash == hash => Some(rec.response),
            Ok(_) | Err(_) => {
                log::warn!("ignoring unreadable cache entry {hash}");
                None
            }
        }
    }

    pub fn put(&self, req: &ChatRequest, reply: &BackendReply, latency_ms: f64) -> io::Result<()> {
        let hash = req.request_hash();
        let record = CacheRecord {
            request_hash: hash.clone(),
            request: req.clone(),
            response: CachedResponse {
                text: reply.text.clone(),
                finish_reason: reply.finish_reason,
                latency_ms,
            },
        };
        let bytes = serde_json::to_vec_pretty(&record).map_err(io::Error::other)?;
        let _guard = self.write_lock.lock().unwrap_or_else(|p| p.into_inner());
        let tmp = self.dir.join(format!(".{hash}.tmp"));
        fs::write(&tmp, bytes)?;
        fs::rename(tmp, self.path(&hash))
    }

    pub fn len(&self) -> usize {
        fs::read_dir(&self.dir)
            .map(|rd| {
                rd.filter_map(Result::ok)
                    .filter(|e| e.path().extension().is_some_and(|x| x == "json"))
                    .count()
            })
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{Gateway, MockBackend, MockPersonality};
    use crate::prompting::Message;
    use std::sync::Arc;

    #[test]
    fn second_request_served_from_cache() {
        let dir = tempfile::tempdir().unwrap();
        let mock = Arc::new(MockBackend::new(MockPersonality::Constant));
        let gw = Gateway::new(mock.clone()).with_cache(ResponseCache::open(dir.path()).unwrap());
        let req = ChatRequest::new("m", vec![Message::user("rate dog")], 16);
        let a = gw.complete(&req).unwrap();
        let b = gw.complete(&req).unwrap();
        assert!(!a.from_cache);
        assert!(b.from_cache);
        assert_eq!(a.text, b.text);
        assert_eq!(a.request_hash, b.request_hash);
        assert_eq!(gw.backend_calls(), 1);
        assert_eq!(mock.requests().len(), 1);
    }

    #[test]
    fn cached_batch_makes_no_calls() {
        let dir = tempfile::tempdir().unwrap();
        let reqs: Vec<ChatRequest> = (0..20)
            .map(|i| ChatRequest::new("m", vec![Message::user(format!("item {i}"))], 16))
            .collect();
        let first = Gateway::new(Arc::new(MockBackend::new(MockPersonality::Garbage)))
            .with_cache(ResponseCache::open(dir.path()).unwrap());
        first.complete_batch(&reqs, 4);
        assert_eq!(first.backend_calls(), 20);

        let second = Gateway::new(Arc::new(MockBackend::new(MockPersonality::Garbage)))
            .with_cache(ResponseCache::open(dir.path()).unwrap());
        let out = second.complete_batch(&reqs, 4);
        assert_eq!(second.backend_calls(), 0);
        assert!(out.iter().all(|r| r.as_ref().unwrap().from_cache));
    }

    #[test]
    fn corrupt_entry_is_a_miss() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::open(dir.path()).unwrap();
        let req = ChatRequest::new("m", vec![Message::user("x")], 16);
        fs::write(cache.path(&req.request_hash()), b"{not json").unwrap();
        assert!(cache.get(&req.request_hash()).is_none());
    }
}
