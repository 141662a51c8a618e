//! Network service: one simulation task, any number of TCP and WebSocket
//! sessions talking to it through channels.

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message as WsMessage, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{broadcast, mpsc, oneshot, watch};
use tokio::task::JoinHandle;
use tracing::{debug, info, warn};

use super::config::DeviceConfig;
use super::sim::{triage, DeviceSim, Reply};
use crate::protocol::{encode, Command, DecodeError, FrameDecoder, Message};

/// Frames buffered per subscriber before a slow reader starts losing them.
const TELEMETRY_BACKLOG: usize = 4096;

type Request = (Command, oneshot::Sender<Reply>);
type Frame = Arc<Vec<u8>>;

/// Channels a session uses to reach the simulation.
#[derive(Clone)]
struct Link {
    commands: mpsc::Sender<Request>,
    telemetry: broadcast::Sender<Frame>,
    shutdown: watch::Receiver<bool>,
}

/// A running service. Dropping it does not stop the tasks; call
/// [`ServiceHandle::shutdown`].
pub struct ServiceHandle {
    tcp_addr: SocketAddr,
    ws_addr: SocketAddr,
    shutdown: watch::Sender<bool>,
    tasks: Vec<JoinHandle<()>>,
}

impl ServiceHandle {
    pub fn tcp_addr(&self) -> SocketAddr {
        self.tcp_addr
    }

    pub fn ws_addr(&self) -> SocketAddr {
        self.ws_addr
    }

    pub async fn shutdown(self) {
        let _ = self.shutdown.send(true);
        for task in self.tasks {
            let _ = task.await;
        }
    }

    /// Resolves when every task has exited.
    pub async fn wait(self) {
        for task in self.tasks {
            let _ = task.await;
        }
    }
}

/// Binds both listeners and starts the simulation. Port 0 picks a free port.
pub async fn start(config: DeviceConfig) -> std::io::Result<ServiceHandle> {
    let bind = &config.service.bind;
    let tcp = TcpListener::bind((bind.as_str(), config.service.tcp_port)).await?;
    let ws = TcpListener::bind((bind.as_str(), config.service.ws_port)).await?;
    let tcp_addr = tcp.local_addr()?;
    let ws_addr = ws.local_addr()?;

    let (shutdown_tx, shutdown_rx) = watch::channel(false);
    let (cmd_tx, cmd_rx) = mpsc::channel(256);
    let (tel_tx, _) = broadcast::channel(TELEMETRY_BACKLOG);
    let link = Link {
        commands: cmd_tx,
        telemetry: tel_tx.clone(),
        shutdown: shutdown_rx.clone(),
    };

    let sim = DeviceSim::new(config);
    let mut tasks = vec![tokio::spawn(simulate(
        sim,
        cmd_rx,
        tel_tx,
        shutdown_rx.clone(),
    ))];
    tasks.push(tokio::spawn(accept_tcp(tcp, link.clone())));

    let app = Router::new().route("/ws", get(ws_upgrade)).with_state(link);
    let mut stop = shutdown_rx;
    tasks.push(tokio::spawn(async move {
        let served = axum::serve(ws, app)
            .with_graceful_shutdown(async move {
                let _ = stop.wait_for(|s| *s).await;
            })
            .await;
        if let Err(e) = served {
            warn!("websocket server stopped: {e}");
        }
    }));
    info!(%tcp_addr, %ws_addr, "device service listening");
    Ok(ServiceHandle {
        tcp_addr,
        ws_addr,
        shutdown: shutdown_tx,
        tasks,
    })
}

async fn simulate(
    mut sim: DeviceSim,
    mut commands: mpsc::Receiver<Request>,
    telemetry: broadcast::Sender<Frame>,
    mut shutdown: watch::Receiver<bool>,
) {
    let period = Duration::from_secs_f64(sim.config().control_period());
    let realtime = sim.config().sim.realtime;
    let per_frame = sim.config().ticks_per_telemetry() as u64;
    let mut clock = tokio::time::interval(period);
    clock.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Burst);

    loop {
        if realtime {
            tokio::select! {
                _ = clock.tick() => {}
                _ = shutdown.changed() => return,
            }
        } else if *shutdown.borrow() {
            return;
        }
        // commands land between ticks, never inside one
        while let Ok((cmd, reply)) = commands.try_recv() {
            let _ = reply.send(sim.apply_command(cmd));
        }
        if let Err(e) = sim.tick() {
            warn!("simulation halted: {e}");
            let mut stop = shutdown.clone();
            let _ = stop.wait_for(|s| *s).await;
            return;
        }
        if sim.ticks().is_multiple_of(per_frame) {
            let frame = encode(&Message::Telemetry(sim.telemetry())).expect("telemetry encodes");
            // no subscribers is fine
            let _ = telemetry.send(Arc::new(frame));
            if !realtime {
                tokio::task::yield_now().await;
            }
        }
    }
}

/// Turns decoded input into the frame to send back on the same session.
async fn respond(link: &Link, item: Result<Message, DecodeError>) -> Option<Vec<u8>> {
    let reply = match triage(item) {
        Ok(cmd) => {
            let (tx, rx) = oneshot::channel();
            link.commands.send((cmd, tx)).await.ok()?;
            Message::from(rx.await.ok()?)
        }
        Err(Some(answer)) => answer,
        Err(None) => {
            debug!("dropping corrupt input");
            return None;
        }
    };
    encode(&reply).ok()
}

async fn accept_tcp(listener: TcpListener, link: Link) {
    let mut stop = link.shutdown.clone();
    loop {
        tokio::select! {
            accepted = listener.accept() => match accepted {
                Ok((stream, peer)) => {
                    debug!(%peer, "tcp session opened");
                    tokio::spawn(tcp_session(stream, link.clone()));
                }
                Err(e) => warn!("accept failed: {e}"),
            },
            _ = stop.changed() => return,
        }
    }
}

async fn tcp_session(stream: TcpStream, link: Link) {
    let _ = stream.set_nodelay(true);
    let (mut reader, mut writer) = stream.into_split();
    let mut telemetry = link.telemetry.subscribe();
    let mut stop = link.shutdown.clone();
    let mut decoder = FrameDecoder::new();
    let mut buf = vec![0u8; 4096];
    loop {
        tokio::select! {
            read = reader.read(&mut buf) => {
                let n = match read {
                    Ok(0) | Err(_) => return,
                    Ok(n) => n,
                };
                decoder.push(&buf[..n]);
                while let Some(item) = decoder.next_message() {
                    if let Some(frame) = respond(&link, item).await {
                        if writer.write_all(&frame).await.is_err() {
                            return;
                        }
                    }
                }
            }
            frame = telemetry.recv() => match frame {
                Ok(frame) => {
                    if writer.write_all(&frame).await.is_err() {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => warn!("tcp session lagged {n} frames"),
                Err(broadcast::error::RecvError::Closed) => return,
            },
            _ = stop.changed() => return,
        }
    }
}

async fn ws_upgrade(
    upgrade: WebSocketUpgrade,
    State(link): State<Link>,
) -> axum::response::Response {
    upgrade.on_upgrade(move |socket| ws_session(socket, link))
}

async fn ws_session(socket: WebSocket, link: Link) {
    let (mut sink, mut stream) = socket.split();
    let mut telemetry = link.telemetry.subscribe();
    let mut stop = link.shutdown.clone();
    let mut decoder = FrameDecoder::new();
    loop {
        tokio::select! {
            incoming = stream.next() => {
                let bytes = match incoming {
                    Some(Ok(WsMessage::Binary(b))) => b,
                    Some(Ok(WsMessage::Close(_))) | None | Some(Err(_)) => return,
                    Some(Ok(_)) => continue,
                };
                decoder.push(&bytes);
                while let Some(item) = decoder.next_message() {
                    if let Some(frame) = respond(&link, item).await {
                        if sink.send(WsMessage::Binary(frame.into())).await.is_err() {
                            return;
                        }
                    }
                }
            }
            frame = telemetry.recv() => match frame {
                Ok(frame) => {
                    if sink.send(WsMessage::Binary(frame.as_ref().clone().into())).await.is_err() {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => warn!("ws session lagged {n} frames"),
                Err(broadcast::error::RecvError::Closed) => return,
            },
            _ = stop.changed() => {
                let _ = sink.send(WsMessage::Close(None)).await;
                return;
            }
        }
    }
}
