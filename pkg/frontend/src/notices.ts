/** Dismissible error notices: a tiny ordered store the DOM renders from. */

export interface Notice {
  id: number;
  message: string;
}

export class NoticeList {
  private nextId = 1;
  private readonly notices: Notice[] = [];

  /** Called after every mutation; the DOM layer re-renders from `items`. */
  onChange: (() => void) | null = null;

  push(message: string): Notice {
    const notice = { id: this.nextId++, message };
    this.notices.push(notice);
    this.onChange?.();
    return notice;
  }

  dismiss(id: number): void {
    const at = this.notices.findIndex((n) => n.id === id);
    if (at >= 0) {
      this.notices.splice(at, 1);
      this.onChange?.();
    }
  }

  get items(): readonly Notice[] {
    return this.notices;
  }
}
