/** Latest-wins guard for in-flight requests.
 *
 * Each view keeps one gate; a response is applied only if no newer request
 * was issued while it was in flight, so a slow early response can never
 * overwrite a fast later one.
 */
export class RequestGate {
  private seq = 0;

  issue(): number {
    return ++this.seq;
  }

  current(ticket: number): boolean {
    return ticket === this.seq;
  }
}
