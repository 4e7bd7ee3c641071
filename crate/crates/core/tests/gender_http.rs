mod common;

use common::{genderize_stub, StubServer};
use epimine::profile::{infer_gender, Gender, GenderClient, GenderSource, LiveSettings, API_KEY_HEADER};

fn settings(base: &str) -> LiveSettings {
    LiveSettings {
        api_key: Some("secret".into()),
        initial_backoff_ms: 1,
        ..LiveSettings::new(base)
    }
}

#[test]
fn live_protocol_and_cache() {
    let stub = genderize_stub();
    let client = GenderClient::live(settings(&stub.base_url)).unwrap();

    let r = infer_gender(Some("Mary Jones"), &client);
    assert_eq!(r.gender, Gender::Female);
    assert_eq!(r.probability, Some(0.99));
    assert_eq!(r.source, Some(GenderSource::Live));

    let r = infer_gender(Some("mary"), &client);
    assert_eq!(r.source, Some(GenderSource::Cache));
    assert_eq!(client.requests(), 1);

    let r = infer_gender(Some("Zzyzx Q"), &client);
    assert_eq!(r.gender, Gender::Unknown);
    assert_eq!(r.probability, None);

    let seen = stub.seen.lock().unwrap().clone();
    assert_eq!(seen.len(), 2);
    assert_eq!(seen[0].query_name().as_deref(), Some("mary"));
    assert_eq!(seen[0].header(API_KEY_HEADER), Some("secret"));
}

#[test]
fn server_error_yields_unknown() {
    let stub = StubServer::start(|_, _| (500, "{}".into()));
    let client = GenderClient::live(settings(&stub.base_url)).unwrap();
    let r = infer_gender(Some("James"), &client);
    assert_eq!(r.gender, Gender::Unknown);
    assert!(r.note.unwrap().contains("500"));
}

#[test]
fn rate_limit_backs_off_then_succeeds_or_gives_up() {
    let stub = StubServer::start(|_, n| {
        if n < 3 {
            (429, "{}".into())
        } else {
            (200, r#"{"name":"james","gender":"male","probability":0.98,"count":1}"#.into())
        }
    });
    let client = GenderClient::live(settings(&stub.base_url)).unwrap();
    assert_eq!(infer_gender(Some("james"), &client).gender, Gender::Male);
    assert_eq!(client.requests(), 3);

    let always = StubServer::start(|_, _| (429, "{}".into()));
    let client = GenderClient::live(LiveSettings { max_retries: 2, ..settings(&always.base_url) }).unwrap();
    let r = infer_gender(Some("mary"), &client);
    assert_eq!(r.gender, Gender::Unknown);
    assert_eq!(always.hits(), 3);
}

#[test]
fn cache_file_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gender.jsonl");
    let stub = genderize_stub();
    {
        let client = GenderClient::live(settings(&stub.base_url))
            .unwrap()
            .with_cache_file(path.clone())
            .unwrap();
        infer_gender(Some("mary"), &client);
    }
    let client = GenderClient::live(settings(&stub.base_url))
        .unwrap()
        .with_cache_file(path)
        .unwrap();
    let r = infer_gender(Some("Mary"), &client);
    assert_eq!(r.source, Some(GenderSource::Cache));
    assert_eq!(client.requests(), 0);
    assert_eq!(stub.hits(), 1);
}

#[test]
fn warm_cache_under_concurrency_makes_no_requests() {
    use rayon::prelude::*;
    let stub = genderize_stub();
    let client = GenderClient::live(settings(&stub.base_url)).unwrap();
    let names = ["mary", "james", "mary", "james", "mary"];
    names.par_iter().for_each(|n| {
        infer_gender(Some(n), &client);
    });
    assert_eq!(client.requests(), 2);
    names.par_iter().for_each(|n| {
        assert_eq!(infer_gender(Some(n), &client).source, Some(GenderSource::Cache));
    });
    assert_eq!(client.requests(), 2);
}
