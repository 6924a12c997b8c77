/** Incremental parser for newline-delimited JSON streams.
 *
 * Feed it arbitrary chunk boundaries; it emits one parsed object per
 * complete line and holds the trailing partial line until more data (or
 * flush) arrives. Malformed lines are reported, not thrown, so one bad
 * frame cannot kill a live stream.
 */
export class NdjsonParser<T> {
  private buffer = "";

  constructor(
    private readonly onRecord: (record: T) => void,
    private readonly onError: (line: string, error: unknown) => void = () => {},
  ) {}

  push(chunk: string): void {
    this.buffer += chunk;
    let index = this.buffer.indexOf("\n");
    while (index >= 0) {
      const line = this.buffer.slice(0, index);
      this.buffer = this.buffer.slice(index + 1);
      this.emit(line);
      index = this.buffer.indexOf("\n");
    }
  }

  /** Parse whatever is left in the buffer as a final line. */
  flush(): void {
    const line = this.buffer;
    this.buffer = "";
    this.emit(line);
  }

  private emit(line: string): void {
    const trimmed = line.trim();
    if (!trimmed) return;
    try {
      this.onRecord(JSON.parse(trimmed) as T);
    } catch (error) {
      this.onError(trimmed, error);
    }
  }
}

/** Drain a web ReadableStream of NDJSON into a callback, resolving when
 * the stream closes. */
export async function readNdjsonStream<T>(
  body: ReadableStream<Uint8Array>,
  onRecord: (record: T) => void,
  onError?: (line: string, error: unknown) => void,
): Promise<number> {
  let count = 0;
  const parser = new NdjsonParser<T>((record) => {
    count += 1;
    onRecord(record);
  }, onError);
  const decoder = new TextDecoder();
  const reader = body.getReader();
  for (;;) {
    const { done, value } = await reader.read();
    if (done) break;
    parser.push(decoder.decode(value, { stream: true }));
  }
  parser.push(decoder.decode());
  parser.flush();
  return count;
}
