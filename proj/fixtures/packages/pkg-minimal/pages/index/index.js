Page({
  onLoad() {
    wx.getLocation({ type: 'gcj02', success: (res) => this.setData({ loc: res }) });
  },
});
