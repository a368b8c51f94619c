//! Real TCP transport: one reader and one writer lock per direction, writes
//! atomic per frame.

use super::frame::{read_frame, write_frame};
use super::Session;
use crate::error::Result;
use crate::wire::Message;
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::Mutex;

pub struct TcpSession {
    reader: Mutex<TcpStream>,
    writer: Mutex<TcpStream>,
}

impl TcpSession {
    pub fn new(stream: TcpStream) -> Result<Self> {
        stream.set_nodelay(true)?;
        let reader = stream.try_clone()?;
        Ok(TcpSession {
            reader: Mutex::new(reader),
            writer: Mutex::new(stream),
        })
    }

    pub fn connect<A: ToSocketAddrs>(addr: A) -> Result<Self> {
        Self::new(TcpStream::connect(addr)?)
    }
}

impl Session for TcpSession {
    fn send(&self, msg: &Message) -> Result<()> {
        let mut w = self.writer.lock().expect("writer lock poisoned");
        write_frame(&mut *w, msg)
    }

    fn recv(&self) -> Result<Option<Message>> {
        let mut r = self.reader.lock().expect("reader lock poisoned");
        read_frame(&mut *r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::net::TcpListener;

    #[test]
    fn round_trip_over_loopback() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let server = std::thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let session = TcpSession::new(stream).unwrap();
            let msg = session.recv().unwrap().unwrap();
            session.send(&msg).unwrap();
        });
        let session = TcpSession::connect(addr).unwrap();
        let msg = Message::End { round_id: 12 };
        session.send(&msg).unwrap();
        assert_eq!(session.recv().unwrap().unwrap(), msg);
        server.join().unwrap();
        assert!(session.recv().unwrap().is_none());
    }
}
