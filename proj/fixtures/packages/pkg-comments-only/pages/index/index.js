/*
wx.getClipboardData({ success() {} });
wx.getLocation({ type: 'wgs84' });
*/
// wx.chooseImage({ count: 1 });
const note = "wx.getClipboardData()";
