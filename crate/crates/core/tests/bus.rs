use std::net::SocketAddr;
use std::time::Duration;

use openpda_core::bus::{Broker, BrokerConfig, BusClient, BusError, ClientOptions, Deliveries, Delivery};
use tokio::time::{timeout, Instant};

fn loopback() -> BrokerConfig {
    BrokerConfig { bind: SocketAddr::from(([127, 0, 0, 1], 0)), ..BrokerConfig::default() }
}

async fn client(broker: &Broker, id: &str) -> (BusClient, Deliveries) {
    BusClient::connect(broker.local_addr(), id, ClientOptions::default()).await.unwrap()
}

async fn next(rx: &mut Deliveries) -> Delivery {
    timeout(Duration::from_secs(3), rx.recv()).await.expect("delivery in time").expect("open")
}

#[tokio::test]
async fn connect_ping_and_bind_failure() {
    let broker = Broker::start(loopback()).await.unwrap();
    let (c, _rx) = client(&broker, "a").await;
    c.ping().await.unwrap();

    let clash = BrokerConfig { bind: broker.local_addr(), ..BrokerConfig::default() };
    assert!(matches!(Broker::start(clash).await, Err(BusError::BindFailure { .. })));
}

#[tokio::test]
async fn exact_and_wildcard_subscriptions() {
    let broker = Broker::start(loopback()).await.unwrap();
    let (exact, mut exact_rx) = client(&broker, "exact").await;
    let (wild, mut wild_rx) = client(&broker, "wild").await;
    let (publisher, _) = client(&broker, "pub").await;
    exact.subscribe("home/commands").await.unwrap();
    wild.subscribe("home/#").await.unwrap();

    publisher.publish("home/commands", "c1").await.unwrap();
    publisher.publish("home/sensorData", "s1").await.unwrap();
    publisher.publish("other/topic", "o1").await.unwrap();
    publisher.publish("home/commands", "c2").await.unwrap();

    assert_eq!(next(&mut exact_rx).await.payload, "c1");
    assert_eq!(next(&mut exact_rx).await.payload, "c2");
    let got: Vec<String> = [next(&mut wild_rx).await, next(&mut wild_rx).await, next(&mut wild_rx).await]
        .into_iter()
        .map(|d| d.payload)
        .collect();
    assert_eq!(got, ["c1", "s1", "c2"]);
    tokio::time::sleep(Duration::from_millis(100)).await;
    assert!(exact_rx.try_recv().is_none());
    assert!(wild_rx.try_recv().is_none());
}

#[tokio::test]
async fn bad_filter_rejected() {
    let broker = Broker::start(loopback()).await.unwrap();
    let (c, _) = client(&broker, "a").await;
    assert!(matches!(c.subscribe("home/#/x").await, Err(BusError::BadFilter(_))));
    c.ping().await.unwrap();
}

#[tokio::test]
async fn publisher_can_also_subscribe() {
    let broker = Broker::start(loopback()).await.unwrap();
    let (c, mut rx) = client(&broker, "both").await;
    c.subscribe("loop").await.unwrap();
    c.publish("loop", "echo").await.unwrap();
    assert_eq!(next(&mut rx).await.payload, "echo");
}

#[tokio::test]
async fn zero_subscribers_accepted() {
    let broker = Broker::start(loopback()).await.unwrap();
    let (c, _) = client(&broker, "a").await;
    c.publish("nobody/listens", "x").await.unwrap();
}

#[tokio::test]
async fn prompt_ack_gives_single_delivery() {
    let broker = Broker::start(BrokerConfig { retry_interval: Duration::from_millis(200), ..loopback() })
        .await
        .unwrap();
    let (sub, mut rx) = client(&broker, "sub").await;
    let (publisher, _) = client(&broker, "pub").await;
    sub.subscribe("t").await.unwrap();
    publisher.publish("t", "once").await.unwrap();
    next(&mut rx).await;
    tokio::time::sleep(Duration::from_millis(700)).await;
    assert!(rx.try_recv().is_none());
}

#[tokio::test]
async fn withheld_ack_is_redelivered() {
    let broker = Broker::start(loopback()).await.unwrap();
    let manual = ClientOptions { auto_ack: false, ..ClientOptions::default() };
    let (sub, mut rx) = BusClient::connect(broker.local_addr(), "slow", manual).await.unwrap();
    let (publisher, _) = client(&broker, "pub").await;
    sub.subscribe("t").await.unwrap();
    publisher.publish("t", "again").await.unwrap();

    let first = next(&mut rx).await;
    let stop = Instant::now() + Duration::from_millis(2500);
    let mut seen = vec![first.clone()];
    while let Ok(Some(d)) = tokio::time::timeout_at(stop, rx.recv()).await {
        seen.push(d);
    }
    assert!(seen.len() >= 3, "only {} deliveries", seen.len());
    assert!(seen.iter().all(|d| d.id == first.id));

    sub.ack(first.id).unwrap();
    sub.ack(first.id).unwrap();
    sub.ack(first.id + 1000).unwrap();
    tokio::time::sleep(Duration::from_millis(1500)).await;
    while rx.try_recv().is_some() {}
    tokio::time::sleep(Duration::from_millis(1200)).await;
    assert!(rx.try_recv().is_none(), "redelivered after ack");
    sub.ping().await.unwrap();
}

#[tokio::test]
async fn msg_ids_unique_across_publishers() {
    let broker = Broker::start(loopback()).await.unwrap();
    let (sub, mut rx) = client(&broker, "sub").await;
    sub.subscribe("#").await.unwrap();
    let (a, _) = client(&broker, "a").await;
    let (b, _) = client(&broker, "b").await;
    for i in 0..10 {
        a.publish("x", &format!("a{i}")).await.unwrap();
        b.publish("y", &format!("b{i}")).await.unwrap();
    }
    let mut ids = Vec::new();
    for _ in 0..20 {
        ids.push(next(&mut rx).await.id);
    }
    let mut unique = ids.clone();
    unique.sort();
    unique.dedup();
    assert_eq!(unique.len(), 20);
}

#[tokio::test]
async fn disconnect_reports_not_connected() {
    let broker = Broker::start(loopback()).await.unwrap();
    let (c, _) = client(&broker, "a").await;
    c.disconnect();
    assert!(matches!(c.publish("t", "x").await, Err(BusError::NotConnected)));
    let (d, _) = client(&broker, "b").await;
    broker.shutdown().await;
    timeout(Duration::from_secs(2), d.closed()).await.expect("client sees broker shutdown");
    assert!(!d.is_connected());
}

#[tokio::test]
async fn drops_still_deliver_everything_in_order() {
    let config = BrokerConfig { retry_interval: Duration::from_millis(50), drop_rate: 0.2, fault_seed: 7, ..loopback() };
    let broker = Broker::start(config).await.unwrap();
    let options = ClientOptions { retry_interval: Duration::from_millis(50), ..ClientOptions::default() };
    let (sub, mut rx) = BusClient::connect(broker.local_addr(), "sub", options.clone()).await.unwrap();
    sub.subscribe("t").await.unwrap();
    let (publisher, _) = BusClient::connect(broker.local_addr(), "pub", options).await.unwrap();
    tokio::spawn(async move {
        for i in 0..30 {
            publisher.publish("t", &i.to_string()).await.unwrap();
        }
    });
    let mut firsts = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let deadline = Instant::now() + Duration::from_secs(10);
    while firsts.len() < 30 {
        let d = tokio::time::timeout_at(deadline, rx.recv()).await.expect("all within 10 s").unwrap();
        if seen.insert(d.id) {
            firsts.push(d.payload.parse::<u32>().unwrap());
        }
    }
    assert_eq!(firsts, (0..30).collect::<Vec<_>>());
}
