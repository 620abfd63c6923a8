use std::net::SocketAddr;

use chrono::Utc;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use tokio::sync::watch;
use tokio::task::JoinHandle;
use tokio::time::MissedTickBehavior;
use tokio_util::sync::CancellationToken;

use super::{apply_command, tick, SimConfig, SimError, SimState};
use crate::bus::{Backoff, BusClient, BusError, ClientOptions, Deliveries, COMMAND_NACK_TOPIC, COMMAND_TOPIC, SENSOR_TOPIC};
use crate::home::HomeCommand;

/// A running simulator. Dropping the handle stops it.
pub struct SimHandle {
    state: watch::Receiver<SimState>,
    cancel: CancellationToken,
    task: JoinHandle<()>,
}

impl SimHandle {
    pub fn state(&self) -> SimState {
        self.state.borrow().clone()
    }

    pub fn is_running(&self) -> bool {
        !self.task.is_finished()
    }

    /// A receiver that is notified on every tick and every applied command.
    pub fn watch(&self) -> watch::Receiver<SimState> {
        self.state.clone()
    }

    pub async fn shutdown(mut self) {
        self.cancel.cancel();
        let _ = (&mut self.task).await;
    }

    pub async fn wait(&mut self) {
        let _ = (&mut self.task).await;
    }
}

impl Drop for SimHandle {
    fn drop(&mut self) {
        self.cancel.cancel();
    }
}

/// Starts the simulator: it connects to the broker (retrying with backoff),
/// publishes a reading every interval and executes relay commands.
pub fn spawn(config: SimConfig, bus: SocketAddr) -> Result<SimHandle, SimError> {
    config.validate()?;
    let (tx, rx) = watch::channel(SimState::initial(&config, Utc::now()));
    let cancel = CancellationToken::new();
    let task = tokio::spawn(run(config, bus, tx, cancel.clone()));
    Ok(SimHandle { state: rx, cancel, task })
}

async fn run(config: SimConfig, bus: SocketAddr, state: watch::Sender<SimState>, cancel: CancellationToken) {
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut backoff = Backoff::default();
    let client_id = format!("device-sim-{}", config.device_id);
    loop {
        let connected = async {
            let (client, deliveries) = BusClient::connect(bus, &client_id, ClientOptions::default()).await?;
            client.subscribe(COMMAND_TOPIC).await?;
            Ok::<_, BusError>((client, deliveries))
        };
        match connected.await {
            Ok((client, mut deliveries)) => {
                backoff.reset();
                tracing::info!(%bus, device = %config.device_id, "device sim connected");
                let outcome = serve(&config, &client, &mut deliveries, &state, &mut rng, &cancel).await;
                client.disconnect();
                match outcome {
                    Ok(()) => return,
                    Err(e) => tracing::warn!(error = %e, "device sim lost bus connection"),
                }
            }
            Err(e) => tracing::warn!(%bus, error = %e, "device sim cannot reach broker"),
        }
        tokio::select! {
            _ = cancel.cancelled() => return,
            _ = tokio::time::sleep(backoff.next_delay()) => {}
        }
    }
}

/// Runs until cancelled (`Ok`) or the connection fails (`Err`).
async fn serve(
    config: &SimConfig,
    client: &BusClient,
    deliveries: &mut Deliveries,
    state: &watch::Sender<SimState>,
    rng: &mut ChaCha8Rng,
    cancel: &CancellationToken,
) -> Result<(), BusError> {
    let dt = config.publish_interval.as_secs_f64();
    let mut timer = tokio::time::interval(config.publish_interval);
    timer.set_missed_tick_behavior(MissedTickBehavior::Delay);
    loop {
        tokio::select! {
            _ = cancel.cancelled() => return Ok(()),
            _ = timer.tick() => {
                let next = tick(&state.borrow(), dt, config, rng).expect("interval is positive");
                let payload = serde_json::to_string(&next.reading(&config.device_id)).expect("reading serializes");
                state.send_replace(next);
                client.publish(SENSOR_TOPIC, &payload).await?;
            }
            delivery = deliveries.recv() => {
                let Some(delivery) = delivery else { return Err(BusError::NotConnected) };
                let command: HomeCommand = match serde_json::from_str(&delivery.payload) {
                    Ok(c) => c,
                    Err(e) => {
                        tracing::warn!(error = %e, "malformed command ignored");
                        continue;
                    }
                };
                let applied = apply_command(&state.borrow(), &command);
                match applied {
                    Ok(next) => {
                        tracing::info!(relay = %command.relay, action = ?command.action, "command applied");
                        state.send_replace(next);
                    }
                    Err(e) => {
                        let nack = json!({
                            "correlation_id": command.correlation_id,
                            "relay": command.relay,
                            "error": e.to_string(),
                        });
                        client.publish(COMMAND_NACK_TOPIC, &nack.to_string()).await?;
                    }
                }
            }
        }
    }
}
