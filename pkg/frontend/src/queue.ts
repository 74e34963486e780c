/** One-at-a-time action queue. User actions (block, unblock, schedule) run
 * through here so optimistic updates never interleave.
 */

export class ActionQueue {
  private tail: Promise<unknown> = Promise.resolve();

  run<T>(task: () => Promise<T>): Promise<T> {
    const next = this.tail.then(task, task);
    this.tail = next.then(
      () => undefined,
      () => undefined,
    );
    return next;
  }
}
